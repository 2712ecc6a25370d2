#!/usr/bin/env node
/**
 * extract --input <dir> --model <name> --out <file>
 *
 * Runs the named pretrained backbone over a directory of per-video frame
 * image folders and writes the feature interchange CSV.
 */
import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { InputError, extract } from "./extract";
import { MissingWeightsError, ModelFormatError, loadModel, resolveModelPath } from "./model";

export function run(argv: string[]): number {
  const args = yargs(argv)
    .option("input", {
      type: "string",
      demandOption: true,
      describe: "root directory with one folder of frame images per video",
    })
    .option("model", {
      type: "string",
      demandOption: true,
      describe: "backbone name (emotieffnet_b0 | mt_emotieffnet_b0 | tiny) or a path to a model .json",
    })
    .option("out", {
      type: "string",
      demandOption: true,
      describe: "output feature file path",
    })
    .strict()
    .exitProcess(false)
    .parseSync();

  try {
    const model = loadModel(resolveModelPath(args.model));
    const report = extract({ inputRoot: args.input, model, outPath: args.out });
    console.error(
      `wrote ${report.rows} rows from ${report.videos} videos to ${args.out}` +
        (report.skipped.length ? ` (skipped ${report.skipped.length})` : ""),
    );
    return 0;
  } catch (e) {
    if (e instanceof MissingWeightsError || e instanceof ModelFormatError) {
      console.error(`error: ${(e as Error).message}`);
      return 2;
    }
    if (e instanceof InputError) {
      console.error(`error: ${(e as Error).message}`);
      return 3;
    }
    throw e;
  }
}

if (require.main === module) {
  process.exit(run(hideBin(process.argv)));
}
