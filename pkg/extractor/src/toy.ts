/**
 * Deterministic toy image folders for tests and demos: each class gets a
 * distinct base color and stripe orientation plus seeded pixel noise, which
 * is plenty of signal for any feature extractor to separate.
 */

import * as fs from "fs";
import * as path from "path";
import { PNG } from "pngjs";
import { mulberry32 } from "./rng";

const PALETTE: [number, number, number][] = [
  [200, 40, 40],
  [40, 200, 40],
  [40, 40, 200],
  [200, 200, 40],
  [200, 40, 200],
  [40, 200, 200],
  [230, 120, 20],
  [120, 20, 230],
];

export function makeToyDataset(
  outDir: string,
  opts: { classes?: number; perClass?: number; size?: number; seed?: number } = {}
): string[] {
  const { classes = 4, perClass = 8, size = 64, seed = 0 } = opts;
  if (classes > PALETTE.length) {
    throw new Error(`at most ${PALETTE.length} toy classes supported`);
  }
  const names: string[] = [];
  for (let c = 0; c < classes; c++) {
    const name = `class_${String(c).padStart(2, "0")}`;
    names.push(name);
    const dir = path.join(outDir, name);
    fs.mkdirSync(dir, { recursive: true });
    const [r, g, b] = PALETTE[c];
    for (let i = 0; i < perClass; i++) {
      const rng = mulberry32(seed * 100003 + c * 1009 + i);
      const png = new PNG({ width: size, height: size });
      const stripe = 4 + (c % 3) * 4;
      for (let y = 0; y < size; y++) {
        for (let x = 0; x < size; x++) {
          const idx = 4 * (y * size + x);
          const on = c % 2 === 0 ? (x / stripe) % 2 < 1 : (y / stripe) % 2 < 1;
          const base = on ? 1.0 : 0.45;
          png.data[idx] = Math.min(255, Math.round(base * r + 25 * rng()));
          png.data[idx + 1] = Math.min(255, Math.round(base * g + 25 * rng()));
          png.data[idx + 2] = Math.min(255, Math.round(base * b + 25 * rng()));
          png.data[idx + 3] = 255;
        }
      }
      fs.writeFileSync(
        path.join(dir, `img_${String(i).padStart(3, "0")}.png`),
        PNG.sync.write(png)
      );
    }
  }
  return names;
}
