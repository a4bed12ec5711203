/** Export job: encode input texts and write an embedding file. */

import { createEncoder, l2Normalize } from "./encoder.js";
import { EmbeddingRecord, writeBinary, writeJsonl } from "./format.js";
import { readDocs, readUnitCache, TextRecord } from "./inputs.js";

export interface ExportJob {
  input: string;
  kind: "docs" | "units";
  model: string;
  out: string;
  format: "binary" | "jsonl";
  batchSize: number;
  normalize: boolean;
  mode: "all" | "sparse" | "dense";
}

export interface ExportResult {
  records: EmbeddingRecord[];
  dim: number;
}

export function encodeRecords(
  texts: TextRecord[],
  model: string,
  normalize: boolean,
  batchSize: number,
): ExportResult {
  const encoder = createEncoder(model);
  if (!Number.isInteger(batchSize) || batchSize < 1) {
    throw new Error(`batch size must be a positive integer, got ${batchSize}`);
  }
  const records: EmbeddingRecord[] = [];
  for (let start = 0; start < texts.length; start += batchSize) {
    const batch = texts.slice(start, start + batchSize);
    for (const { id, text } of batch) {
      let vector = encoder.encode(text);
      if (normalize) {
        vector = l2Normalize(vector, JSON.stringify(id));
      }
      records.push({ id, vector });
    }
  }
  return { records, dim: encoder.dim };
}

export function runExport(job: ExportJob): ExportResult {
  const texts =
    job.kind === "docs" ? readDocs(job.input) : readUnitCache(job.input, job.mode);
  const result = encodeRecords(texts, job.model, job.normalize, job.batchSize);
  if (result.records.length !== texts.length) {
    throw new Error(
      `record count ${result.records.length} != input count ${texts.length}`,
    );
  }
  if (job.format === "binary") {
    writeBinary(job.out, result.records, result.dim);
  } else {
    writeJsonl(job.out, result.records, result.dim);
  }
  return result;
}
