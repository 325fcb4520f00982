#!/usr/bin/env node
import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { extract } from "./extract";
import { loadManifest } from "./manifest";
import { makeToyDataset } from "./toy";

yargs(hideBin(process.argv))
  .command(
    "extract",
    "Run the backbone over an image dataset and write owcl v1 task files",
    (y) =>
      y.option("manifest", {
        type: "string",
        demandOption: true,
        describe: "Path to the extraction manifest (JSON)",
      }),
    (argv) => {
      const result = extract(loadManifest(argv.manifest));
      console.log(JSON.stringify(result, null, 2));
    }
  )
  .command(
    "make-toy",
    "Generate a deterministic toy image folder (class subdirectories of PNGs)",
    (y) =>
      y
        .option("out", { type: "string", demandOption: true })
        .option("classes", { type: "number", default: 4 })
        .option("per-class", { type: "number", default: 8 })
        .option("size", { type: "number", default: 64 })
        .option("seed", { type: "number", default: 0 }),
    (argv) => {
      const names = makeToyDataset(argv.out, {
        classes: argv.classes,
        perClass: argv["per-class"] as number,
        size: argv.size,
        seed: argv.seed,
      });
      console.log(JSON.stringify({ out: argv.out, classes: names }, null, 2));
    }
  )
  .demandCommand(1)
  .strict()
  .parse();
