/**
 * The extraction manifest: which backbone, which dataset, how classes are
 * partitioned into tasks, and which classes are reserved as open.
 *
 * Validation enforces the bookkeeping rules up front: open classes never
 * appear in a train partition, no class is trained twice, and the task
 * partition plus the open reservation must cover the dataset's class
 * directories exactly.
 */

import * as fs from "fs";
import * as path from "path";
import { z } from "zod";
import { DEFAULT_BACKBONE } from "./backbone";

const TaskSpec = z.object({
  task_id: z.number().int().nonnegative(),
  train_classes: z.array(z.string()).nonempty(),
});

export const ExtractionManifestSchema = z.object({
  backbone: z.string().default(DEFAULT_BACKBONE),
  dataset_name: z.string(),
  dataset_dir: z.string(),
  out_dir: z.string(),
  tasks: z.array(TaskSpec).nonempty(),
  open_classes: z.array(z.string()).default([]),
  test_fraction: z.number().gt(0).lt(1).default(0.25),
  preprocess: z.enum(["standard", "cifar"]).default("standard"),
});

export type ExtractionManifest = z.infer<typeof ExtractionManifestSchema>;

export function loadManifest(manifestPath: string): ExtractionManifest {
  const raw = JSON.parse(fs.readFileSync(manifestPath, "utf-8"));
  const manifest = ExtractionManifestSchema.parse(raw);
  // paths in the manifest are relative to the manifest file
  const base = path.dirname(path.resolve(manifestPath));
  return {
    ...manifest,
    dataset_dir: path.resolve(base, manifest.dataset_dir),
    out_dir: path.resolve(base, manifest.out_dir),
  };
}

export function listClassDirs(datasetDir: string): string[] {
  if (!fs.existsSync(datasetDir)) {
    throw new Error(`dataset directory not found: ${datasetDir}`);
  }
  return fs
    .readdirSync(datasetDir, { withFileTypes: true })
    .filter((e) => e.isDirectory())
    .map((e) => e.name)
    .sort();
}

export function validateManifest(manifest: ExtractionManifest): void {
  const open = new Set(manifest.open_classes);
  const trained = new Set<string>();
  const ids = new Set<number>();
  for (const task of manifest.tasks) {
    if (ids.has(task.task_id)) {
      throw new Error(`duplicate task_id ${task.task_id}`);
    }
    ids.add(task.task_id);
    for (const cls of task.train_classes) {
      if (open.has(cls)) {
        throw new Error(`open-reserved class ${cls} appears in a train partition`);
      }
      // a class may recur across tasks (its train files are split between
      // the occurrences); within one task it may appear only once
      if (task.train_classes.filter((c) => c === cls).length > 1) {
        throw new Error(`class ${cls} listed twice in task ${task.task_id}`);
      }
      trained.add(cls);
    }
  }
  const available = listClassDirs(manifest.dataset_dir);
  const covered = new Set([...trained, ...open]);
  for (const cls of covered) {
    if (!available.includes(cls)) {
      throw new Error(`class ${cls} has no directory under ${manifest.dataset_dir}`);
    }
  }
  for (const cls of available) {
    if (!covered.has(cls)) {
      throw new Error(
        `class ${cls} is neither trained nor open-reserved; the partition must cover the dataset`
      );
    }
  }
}
