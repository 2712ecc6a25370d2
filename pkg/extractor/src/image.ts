/**
 * Image decoding and preprocessing. Input images are PNG crops of faces;
 * each is resized to the model's square input with nearest-neighbour
 * sampling, scaled to [0,1], and channel-normalized.
 */
import * as fs from "fs";
import { PNG } from "pngjs";

import { BackboneModel } from "./model";

export class ImageDecodeError extends Error {}

export interface DecodedImage {
  width: number;
  height: number;
  /** RGBA, 8 bits per channel, row-major */
  data: Buffer;
}

export function decodePng(filePath: string): DecodedImage {
  let png: PNG;
  try {
    png = PNG.sync.read(fs.readFileSync(filePath));
  } catch (e) {
    throw new ImageDecodeError(`cannot decode ${filePath}: ${e}`);
  }
  return { width: png.width, height: png.height, data: png.data };
}

/** Nearest-neighbour resize + normalize into a flat [3*S*S] vector (CHW). */
export function preprocess(img: DecodedImage, model: BackboneModel): Float64Array {
  const s = model.inputSize;
  const out = new Float64Array(3 * s * s);
  for (let y = 0; y < s; y++) {
    const sy = Math.min(img.height - 1, Math.floor((y * img.height) / s));
    for (let x = 0; x < s; x++) {
      const sx = Math.min(img.width - 1, Math.floor((x * img.width) / s));
      const src = (sy * img.width + sx) * 4;
      for (let c = 0; c < 3; c++) {
        const v = img.data[src + c] / 255;
        out[c * s * s + y * s + x] = (v - model.mean[c]) / model.std[c];
      }
    }
  }
  return out;
}
