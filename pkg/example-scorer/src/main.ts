#!/usr/bin/env node
/**
 * Example external scorer.
 *
 *   node dist/src/main.js --model uniform --vocab-size 6
 *   node dist/src/main.js --model unigram --table table.json
 *
 * Speaks the cmlm-scorer v1 protocol on stdin/stdout; invoked by the
 * decoding engine as `--scorer "extern:node .../main.js ..."`.
 */

import { stdin, stdout, exit, argv } from "node:process";

import { ScorerModel, UniformModel, loadUnigramTable } from "./models.js";
import { serve } from "./server.js";

interface CliOptions {
  model: string;
  vocabSize: number;
  table: string | null;
}

function parseArgs(args: string[]): CliOptions {
  const options: CliOptions = { model: "uniform", vocabSize: 6, table: null };
  for (let i = 0; i < args.length; i += 1) {
    const flag = args[i];
    const value = args[i + 1];
    switch (flag) {
      case "--model":
        options.model = value ?? "";
        i += 1;
        break;
      case "--vocab-size":
        options.vocabSize = Number(value);
        i += 1;
        break;
      case "--table":
        options.table = value ?? null;
        i += 1;
        break;
      default:
        throw new Error(`unknown flag ${flag}`);
    }
  }
  return options;
}

function buildModel(options: CliOptions): ScorerModel {
  if (options.model === "uniform") {
    return new UniformModel(options.vocabSize);
  }
  if (options.model === "unigram") {
    if (!options.table) {
      throw new Error("--model unigram needs --table <file.json>");
    }
    return loadUnigramTable(options.table);
  }
  throw new Error(`unknown model ${options.model} (expected uniform or unigram)`);
}

async function run(): Promise<void> {
  const model = buildModel(parseArgs(argv.slice(2)));
  await serve(model, stdin, (line) => {
    stdout.write(line + "\n");
  });
}

run().catch((err) => {
  console.error(`example-scorer: ${err instanceof Error ? err.message : err}`);
  exit(1);
});
