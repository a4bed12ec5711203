/**
 * Embedding file writers (and a reader for round-trip tests).
 *
 * Binary layout, little-endian throughout: magic "REDIEMB1", uint32 dim,
 * then per record a uint16 id byte length, the UTF-8 id bytes, and dim
 * float32 values. JSONL alternative: {"id": ..., "vector": [...]} per
 * line. Values are float32-quantized in both formats.
 */

import { writeFileSync, readFileSync } from "node:fs";

export const MAGIC = "REDIEMB1";

export interface EmbeddingRecord {
  id: string;
  vector: Float64Array;
}

export function serializeBinary(records: EmbeddingRecord[], dim: number): Buffer {
  const chunks: Buffer[] = [];
  const header = Buffer.alloc(MAGIC.length + 4);
  header.write(MAGIC, 0, "ascii");
  header.writeUInt32LE(dim, MAGIC.length);
  chunks.push(header);
  for (const { id, vector } of records) {
    if (vector.length !== dim) {
      throw new Error(`record ${JSON.stringify(id)} has dim ${vector.length}, expected ${dim}`);
    }
    const idBytes = Buffer.from(id, "utf-8");
    if (idBytes.length > 0xffff) {
      throw new Error(`record id too long: ${JSON.stringify(id)}`);
    }
    const head = Buffer.alloc(2);
    head.writeUInt16LE(idBytes.length, 0);
    const values = Buffer.alloc(4 * dim);
    for (let i = 0; i < dim; i++) {
      values.writeFloatLE(Math.fround(vector[i]), 4 * i);
    }
    chunks.push(head, idBytes, values);
  }
  return Buffer.concat(chunks);
}

export function writeBinary(path: string, records: EmbeddingRecord[], dim: number): void {
  writeFileSync(path, serializeBinary(records, dim));
}

export function writeJsonl(path: string, records: EmbeddingRecord[], dim: number): void {
  const lines: string[] = [];
  for (const { id, vector } of records) {
    if (vector.length !== dim) {
      throw new Error(`record ${JSON.stringify(id)} has dim ${vector.length}, expected ${dim}`);
    }
    const quantized = Array.from(vector, (x) => Math.fround(x));
    lines.push(JSON.stringify({ id, vector: quantized }));
  }
  writeFileSync(path, lines.join("\n") + "\n", "utf-8");
}

/** Reader used by tests to confirm what was written. */
export function readBinary(path: string): { dim: number; records: EmbeddingRecord[] } {
  const buf = readFileSync(path);
  if (buf.subarray(0, MAGIC.length).toString("ascii") !== MAGIC) {
    throw new Error(`${path}: bad magic`);
  }
  const dim = buf.readUInt32LE(MAGIC.length);
  const records: EmbeddingRecord[] = [];
  let offset = MAGIC.length + 4;
  while (offset < buf.length) {
    const idLen = buf.readUInt16LE(offset);
    offset += 2;
    const id = buf.subarray(offset, offset + idLen).toString("utf-8");
    offset += idLen;
    const vector = new Float64Array(dim);
    for (let i = 0; i < dim; i++) {
      vector[i] = buf.readFloatLE(offset + 4 * i);
    }
    offset += 4 * dim;
    records.push({ id, vector });
  }
  return { dim, records };
}
