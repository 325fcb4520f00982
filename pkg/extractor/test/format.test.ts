import { describe, expect, it } from "vitest";
import { EmbeddingRow, FormatError, formatTaskFile, parseTaskFile } from "../src/format";

const row = (over: Partial<EmbeddingRow> = {}): EmbeddingRow => ({
  label: 0,
  taskId: 0,
  split: "train",
  vector: [1.5, -2.25],
  ...over,
});

describe("formatTaskFile", () => {
  it("writes header and rows in the v1 layout", () => {
    const text = formatTaskFile(2, 3, [row(), row({ label: null, split: "test" })]);
    const lines = text.split("\n");
    expect(lines[0]).toBe("#owcl v1 dim=2 task=3");
    expect(lines[1]).toBe("0,0,train,1.5,-2.25");
    expect(lines[2]).toBe("UN,0,test,1.5,-2.25");
    expect(text.endsWith("\n")).toBe(true);
  });

  it("round-trips through the reader", () => {
    const rows = [
      row({ vector: [0.1, 123456.789] }),
      row({ label: 7, split: "test", vector: [1e-12, -3.5] }),
    ];
    const parsed = parseTaskFile(formatTaskFile(2, 1, rows));
    expect(parsed.dim).toBe(2);
    expect(parsed.taskId).toBe(1);
    expect(parsed.rows).toHaveLength(2);
    expect(parsed.rows[0].vector[1]).toBe(123456.789);
    expect(parsed.rows[1].label).toBe(7);
  });

  it("rejects the open marker in a train row", () => {
    expect(() => formatTaskFile(2, 0, [row({ label: null })])).toThrow(FormatError);
  });

  it("rejects wrong arity and non-finite values", () => {
    expect(() => formatTaskFile(3, 0, [row()])).toThrow(FormatError);
    expect(() => formatTaskFile(2, 0, [row({ vector: [1, NaN] })])).toThrow(
      FormatError
    );
    expect(() => formatTaskFile(2, 0, [row({ vector: [1, Infinity] })])).toThrow(
      FormatError
    );
  });

  it("serializes shortest round-trip decimals", () => {
    const v = 0.1 + 0.2; // 0.30000000000000004
    const text = formatTaskFile(1, 0, [row({ vector: [v] })]);
    expect(text).toContain("0.30000000000000004");
    expect(parseTaskFile(text).rows[0].vector[0]).toBe(v);
  });
});
