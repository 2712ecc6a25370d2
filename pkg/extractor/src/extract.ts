/**
 * Batch extraction: walk a root directory of per-video frame-image folders,
 * run the backbone over every image, and write the feature interchange file
 * (JSON header line + CSV rows) consumed by the downstream analysis toolkit.
 */
import * as fs from "fs";
import * as path from "path";

import { ImageDecodeError, decodePng, preprocess } from "./image";
import { AFFECTNET_ORDER, BackboneModel, N_LOGITS, forward } from "./model";

export class InputError extends Error {}

export interface ExtractionJob {
  /** directory containing one sub-directory of frame images per video */
  inputRoot: string;
  model: BackboneModel;
  outPath: string;
  log?: (msg: string) => void;
}

export interface ExtractionReport {
  rows: number;
  videos: number;
  skipped: string[];
}

/** Frame index is the trailing integer of the image file name. */
export function frameIndexFromName(fileName: string): number | null {
  const m = /(\d+)(?:\.[A-Za-z0-9]+)?$/.exec(fileName);
  if (!m) return null;
  return parseInt(m[1], 10);
}

/** %.9g-style formatting: 9 significant digits, trailing zeros trimmed. */
export function fmt(x: number): string {
  if (Number.isInteger(x) && Math.abs(x) < 1e15) return String(x);
  return String(Number(x.toPrecision(9)));
}

function featureColumns(d: number): string[] {
  const cols = ["video_id", "frame", "valence", "arousal"];
  for (const name of AFFECTNET_ORDER) cols.push(`logit_${name}`);
  for (let i = 0; i < d; i++) cols.push(`emb_${i}`);
  return cols;
}

export function extract(job: ExtractionJob): ExtractionReport {
  const log = job.log ?? ((msg: string) => console.error(msg));
  if (!fs.existsSync(job.inputRoot) || !fs.statSync(job.inputRoot).isDirectory()) {
    throw new InputError(`input root is not a directory: ${job.inputRoot}`);
  }
  const videoDirs = fs
    .readdirSync(job.inputRoot, { withFileTypes: true })
    .filter((e) => e.isDirectory())
    .map((e) => e.name)
    .sort();
  if (videoDirs.length === 0) {
    throw new InputError(`no video folders under ${job.inputRoot}`);
  }

  const model = job.model;
  const header = {
    version: 1,
    D: model.D,
    logit_order: AFFECTNET_ORDER,
    columns: featureColumns(model.D),
    model: model.name,
    va: model.vaHead !== null,
  };

  const lines: string[] = [JSON.stringify(header)];
  const skipped: string[] = [];
  let rows = 0;
  for (const videoId of videoDirs) {
    const dir = path.join(job.inputRoot, videoId);
    const entries = fs
      .readdirSync(dir)
      .filter((f) => f.toLowerCase().endsWith(".png"))
      .sort();
    const seen = new Set<number>();
    for (const name of entries) {
      const frame = frameIndexFromName(name);
      if (frame === null) {
        skipped.push(path.join(videoId, name));
        log(`skipping ${videoId}/${name}: no trailing frame index`);
        continue;
      }
      if (seen.has(frame)) {
        throw new InputError(
          `duplicate frame index ${frame} in video ${videoId} (${name})`,
        );
      }
      let out;
      try {
        out = forward(model, preprocess(decodePng(path.join(dir, name)), model));
      } catch (e) {
        if (e instanceof ImageDecodeError) {
          skipped.push(path.join(videoId, name));
          log(`skipping ${videoId}/${name}: ${e.message}`);
          continue;
        }
        throw e;
      }
      seen.add(frame);
      const reals: number[] = [out.valence, out.arousal];
      for (let i = 0; i < N_LOGITS; i++) reals.push(out.logits[i]);
      for (let i = 0; i < model.D; i++) reals.push(out.embedding[i]);
      lines.push(`${videoId},${frame},${reals.map(fmt).join(",")}`);
      rows++;
    }
  }

  fs.writeFileSync(job.outPath, lines.join("\n") + "\n", "utf-8");
  return { rows, videos: videoDirs.length, skipped };
}
