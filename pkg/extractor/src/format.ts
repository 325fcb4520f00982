/**
 * Writer (and self-check reader) for the `#owcl v1` embedding text format.
 *
 * One header line `#owcl v1 dim=<d> task=<id>` followed by rows
 * `label,task_id,split,v0,...,v_{d-1}`. The label `UN` marks an open record
 * and is only legal in the test split. Floats are serialized with
 * `String(x)`, the shortest decimal that round-trips a 64-bit float.
 */

export const OPEN_LABEL = "UN";

export interface EmbeddingRow {
  label: number | null; // null = open marker
  taskId: number;
  split: "train" | "test";
  vector: ArrayLike<number>;
}

export class FormatError extends Error {}

function checkRow(row: EmbeddingRow, dim: number, index: number): void {
  if (row.vector.length !== dim) {
    throw new FormatError(
      `row ${index}: vector length ${row.vector.length} != dim ${dim}`
    );
  }
  if (row.split !== "train" && row.split !== "test") {
    throw new FormatError(`row ${index}: bad split ${row.split}`);
  }
  if (row.split === "train" && row.label === null) {
    throw new FormatError(`row ${index}: open marker in train split`);
  }
  if (row.label !== null && (!Number.isInteger(row.label) || row.label < 0)) {
    throw new FormatError(`row ${index}: bad label ${row.label}`);
  }
  for (let i = 0; i < row.vector.length; i++) {
    if (!Number.isFinite(row.vector[i])) {
      throw new FormatError(`row ${index}: non-finite coordinate ${i}`);
    }
  }
}

export function formatTaskFile(
  dim: number,
  taskId: number,
  rows: EmbeddingRow[]
): string {
  const lines = [`#owcl v1 dim=${dim} task=${taskId}`];
  rows.forEach((row, i) => {
    checkRow(row, dim, i);
    const label = row.label === null ? OPEN_LABEL : String(row.label);
    const coords = Array.from(row.vector, (v) => String(v)).join(",");
    lines.push(`${label},${row.taskId},${row.split},${coords}`);
  });
  return lines.join("\n") + "\n";
}

export interface ParsedTaskFile {
  dim: number;
  taskId: number;
  rows: EmbeddingRow[];
}

/** Minimal reader used to self-check emitted text before it hits disk. */
export function parseTaskFile(text: string): ParsedTaskFile {
  const lines = text.split("\n");
  if (lines[lines.length - 1] === "") lines.pop();
  const header = /^#owcl v1 dim=(\d+) task=(\d+)$/.exec(lines[0] ?? "");
  if (!header) throw new FormatError(`malformed header: ${lines[0]}`);
  const dim = Number(header[1]);
  const taskId = Number(header[2]);
  const rows: EmbeddingRow[] = [];
  for (let ln = 1; ln < lines.length; ln++) {
    const parts = lines[ln].split(",");
    if (parts.length !== 3 + dim) {
      throw new FormatError(`line ${ln + 1}: expected ${3 + dim} fields`);
    }
    const label = parts[0] === OPEN_LABEL ? null : Number(parts[0]);
    const split = parts[2];
    if (split !== "train" && split !== "test") {
      throw new FormatError(`line ${ln + 1}: bad split ${split}`);
    }
    const vector = parts.slice(3).map(Number);
    if (vector.some((v) => !Number.isFinite(v))) {
      throw new FormatError(`line ${ln + 1}: non-finite coordinate`);
    }
    const row: EmbeddingRow = { label, taskId: Number(parts[1]), split, vector };
    checkRow(row, dim, ln - 1);
    rows.push(row);
  }
  return { dim, taskId, rows };
}
