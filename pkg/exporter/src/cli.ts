#!/usr/bin/env node
/** CLI wrapper around the export job. */

import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { ExportJob, runExport } from "./export.js";

export async function main(argv: string[]): Promise<number> {
  const args = await yargs(argv)
    .scriptName("redi-embed-export")
    .usage("$0 --input texts.jsonl --kind docs --model hash-64 --out out.emb")
    .option("input", { type: "string", demandOption: true, describe: "corpus or unit-cache JSONL" })
    .option("kind", { choices: ["docs", "units"] as const, demandOption: true })
    .option("model", { type: "string", demandOption: true, describe: "encoder id, e.g. hash-64" })
    .option("out", { type: "string", demandOption: true })
    .option("format", { choices: ["binary", "jsonl"] as const, default: "binary" as const })
    .option("batch-size", { type: "number", default: 32 })
    .option("normalize", { type: "boolean", default: true })
    .option("mode", {
      choices: ["all", "sparse", "dense"] as const,
      default: "all" as const,
      describe: "unit-cache mode filter (kind=units only)",
    })
    .strict()
    .help()
    .parse();

  const job: ExportJob = {
    input: args.input,
    kind: args.kind,
    model: args.model,
    out: args.out,
    format: args.format,
    batchSize: args["batch-size"],
    normalize: args.normalize,
    mode: args.mode,
  };
  try {
    const result = runExport(job);
    console.log(
      `wrote ${result.records.length} records (dim ${result.dim}, ` +
        `${job.format}) -> ${job.out}`,
    );
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 2;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url.endsWith(process.argv[1].split("/").pop() ?? "");
if (invokedDirectly) {
  main(hideBin(process.argv)).then((code) => {
    process.exitCode = code;
  });
}
