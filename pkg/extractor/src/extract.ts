/**
 * The extraction pipeline: image folder -> per-task `#owcl v1` files plus a
 * stream manifest in the same shape the engine's scenario exporter writes.
 *
 * Per class, files are split deterministically (sorted order, tail fraction
 * to test); a class recurring in several tasks has its train files divided
 * evenly across the occurrences. Task t's test split covers every class
 * trained up to t plus all open-reserved classes, labeled UN. Every file's
 * text is self-checked with the reader before anything touches disk.
 */

import * as fs from "fs";
import * as path from "path";
import * as tf from "@tensorflow/tfjs";
import { Backbone, getBackbone } from "./backbone";
import { EmbeddingRow, formatTaskFile, parseTaskFile } from "./format";
import { loadBatch } from "./images";
import { ExtractionManifest, listClassDirs, validateManifest } from "./manifest";

const BATCH_SIZE = 16;

interface ClassFiles {
  name: string;
  id: number;
  trainByTask: Map<number, string[]>;
  test: string[];
}

function listImages(dir: string): string[] {
  return fs
    .readdirSync(dir)
    .filter((f) => f.toLowerCase().endsWith(".png"))
    .sort()
    .map((f) => path.join(dir, f));
}

function planFiles(manifest: ExtractionManifest): ClassFiles[] {
  const classes = listClassDirs(manifest.dataset_dir);
  const plan: ClassFiles[] = [];
  for (const name of classes) {
    const id = classes.indexOf(name);
    const files = listImages(path.join(manifest.dataset_dir, name));
    if (files.length < 2) {
      throw new Error(`class ${name} needs at least 2 images, found ${files.length}`);
    }
    const nTest = Math.max(1, Math.round(files.length * manifest.test_fraction));
    const train = files.slice(0, files.length - nTest);
    const test = files.slice(files.length - nTest);
    const occurrences = manifest.tasks
      .filter((t) => t.train_classes.includes(name))
      .map((t) => t.task_id)
      .sort((a, b) => a - b);
    const trainByTask = new Map<number, string[]>();
    occurrences.forEach((taskId, i) => {
      trainByTask.set(
        taskId,
        train.filter((_, idx) => idx % occurrences.length === i)
      );
    });
    plan.push({ name, id, trainByTask, test });
  }
  return plan;
}

function embedFiles(
  backbone: Backbone,
  files: string[],
  mode: "standard" | "cifar"
): number[][] {
  const out: number[][] = [];
  for (let start = 0; start < files.length; start += BATCH_SIZE) {
    const chunk = files.slice(start, start + BATCH_SIZE);
    const batch = loadBatch(chunk, mode);
    const features = backbone.embed(batch);
    const rows = features.arraySync();
    batch.dispose();
    features.dispose();
    out.push(...rows);
  }
  return out;
}

export interface ExtractionResult {
  manifestPath: string;
  taskPaths: string[];
  dimension: number;
  classIds: Record<string, number>;
  openClassIds: number[];
}

export function extract(manifest: ExtractionManifest): ExtractionResult {
  validateManifest(manifest);
  const backbone = getBackbone(manifest.backbone);
  const plan = planFiles(manifest);
  const byName = new Map(plan.map((c) => [c.name, c]));
  const openIds = manifest.open_classes
    .map((name) => byName.get(name)!.id)
    .sort((a, b) => a - b);

  // Embed each class's test files once; they are reused by later tasks.
  const testEmbeddings = new Map<string, number[][]>();
  const embedTest = (name: string) => {
    if (!testEmbeddings.has(name)) {
      testEmbeddings.set(
        name,
        embedFiles(backbone, byName.get(name)!.test, manifest.preprocess)
      );
    }
    return testEmbeddings.get(name)!;
  };

  const tasks = [...manifest.tasks].sort((a, b) => a.task_id - b.task_id);
  const fileTexts: { name: string; text: string }[] = [];
  const entries: object[] = [];
  const trainedSoFar: string[] = [];
  for (const task of tasks) {
    const rows: EmbeddingRow[] = [];
    for (const cls of task.train_classes) {
      const info = byName.get(cls)!;
      const files = info.trainByTask.get(task.task_id)!;
      for (const vec of embedFiles(backbone, files, manifest.preprocess)) {
        rows.push({ label: info.id, taskId: task.task_id, split: "train", vector: vec });
      }
      if (!trainedSoFar.includes(cls)) trainedSoFar.push(cls);
    }
    for (const cls of [...trainedSoFar].sort()) {
      const info = byName.get(cls)!;
      for (const vec of embedTest(cls)) {
        rows.push({ label: info.id, taskId: task.task_id, split: "test", vector: vec });
      }
    }
    for (const cls of manifest.open_classes) {
      for (const vec of embedTest(cls)) {
        rows.push({ label: null, taskId: task.task_id, split: "test", vector: vec });
      }
    }
    const text = formatTaskFile(backbone.outputDim, task.task_id, rows);
    // self-check: the emitted text must parse back with the same shape
    const parsed = parseTaskFile(text);
    if (parsed.rows.length !== rows.length || parsed.dim !== backbone.outputDim) {
      throw new Error(`self-check failed for task ${task.task_id}`);
    }
    const name = `task_${String(task.task_id).padStart(3, "0")}.owcl`;
    fileTexts.push({ name, text });
    entries.push({
      task_id: task.task_id,
      path: name,
      train_classes: task.train_classes.map((c) => byName.get(c)!.id).sort((a, b) => a - b),
      open_ids_in_test: openIds,
    });
  }

  fs.mkdirSync(manifest.out_dir, { recursive: true });
  const taskPaths = fileTexts.map(({ name, text }) => {
    const p = path.join(manifest.out_dir, name);
    fs.writeFileSync(p, text, { encoding: "utf-8" });
    return p;
  });
  const streamManifest = {
    format: "owcl-scenario",
    version: 1,
    scenario: manifest.dataset_name,
    seed: 0,
    dimension: backbone.outputDim,
    open_class_ids: openIds,
    tasks: entries,
    backbone: backbone.name,
    class_names: Object.fromEntries(plan.map((c) => [c.name, c.id])),
  };
  const manifestPath = path.join(manifest.out_dir, "manifest.json");
  fs.writeFileSync(manifestPath, JSON.stringify(streamManifest, null, 2) + "\n");
  return {
    manifestPath,
    taskPaths,
    dimension: backbone.outputDim,
    classIds: Object.fromEntries(plan.map((c) => [c.name, c.id])),
    openClassIds: openIds,
  };
}
