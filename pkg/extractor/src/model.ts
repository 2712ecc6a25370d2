/**
 * Backbone model files: JSON with base64-encoded little-endian float64
 * weight blocks. A model is a small dense trunk (ReLU) over the normalized,
 * resized RGB image followed by three linear heads: D-dimensional embedding,
 * 8 expression logits (AffectNet order), and an optional tanh VA head.
 */
import * as fs from "fs";
import * as path from "path";

export const AFFECTNET_ORDER = [
  "Anger", "Contempt", "Disgust", "Fear",
  "Happiness", "Neutral", "Sadness", "Surprise",
] as const;

export const N_LOGITS = 8;

export interface Dense {
  /** row-major [rows x cols]; applied as y = W x + b with x of length cols */
  W: Float64Array;
  b: Float64Array;
  rows: number;
  cols: number;
}

export interface BackboneModel {
  name: string;
  /** input image size: model expects inputSize x inputSize RGB */
  inputSize: number;
  /** embedding dimensionality of the penultimate layer */
  D: number;
  /** per-channel normalization applied after scaling pixels to [0,1] */
  mean: [number, number, number];
  std: [number, number, number];
  trunk: Dense[];
  embeddingHead: Dense;
  logitsHead: Dense;
  /** null when the backbone does not predict valence/arousal */
  vaHead: Dense | null;
}

export class MissingWeightsError extends Error {}
export class ModelFormatError extends Error {}

function decodeF64(b64: string, rows: number, cols: number): Float64Array {
  const buf = Buffer.from(b64, "base64");
  if (buf.length !== rows * cols * 8) {
    throw new ModelFormatError(
      `weight block is ${buf.length} bytes, expected ${rows * cols * 8}`,
    );
  }
  // Buffer may not be 8-byte aligned; copy into an aligned slab.
  const out = new Float64Array(rows * cols);
  for (let i = 0; i < out.length; i++) out[i] = buf.readDoubleLE(i * 8);
  return out;
}

function parseDense(obj: any, what: string): Dense {
  if (
    typeof obj?.rows !== "number" || typeof obj?.cols !== "number" ||
    typeof obj?.W !== "string" || typeof obj?.b !== "string"
  ) {
    throw new ModelFormatError(`malformed dense block: ${what}`);
  }
  return {
    rows: obj.rows,
    cols: obj.cols,
    W: decodeF64(obj.W, obj.rows, obj.cols),
    b: decodeF64(obj.b, obj.rows, 1),
  };
}

/** Known released backbones; anything else must be given as a file path. */
export const KNOWN_MODELS = ["emotieffnet_b0", "mt_emotieffnet_b0", "tiny"];

const DOWNLOAD_HINT =
  "download the released weights (see the HSEmotion model zoo) and place " +
  "<name>.json under the models/ directory, or pass --model <path-to-json>";

/**
 * Resolve a --model argument: a path to a .json file is used directly;
 * a bare name is looked up under the package's models/ directory.
 */
export function resolveModelPath(model: string, modelsDir?: string): string {
  if (model.endsWith(".json")) {
    if (!fs.existsSync(model)) {
      throw new MissingWeightsError(`model file not found: ${model}; ${DOWNLOAD_HINT}`);
    }
    return model;
  }
  const dir = modelsDir ?? path.join(__dirname, "..", "models");
  const candidate = path.join(dir, `${model}.json`);
  if (!fs.existsSync(candidate)) {
    const known = KNOWN_MODELS.includes(model)
      ? `weights for '${model}' are not bundled`
      : `unknown model '${model}'`;
    throw new MissingWeightsError(`${known}: ${candidate} missing; ${DOWNLOAD_HINT}`);
  }
  return candidate;
}

export function loadModel(filePath: string): BackboneModel {
  let raw: any;
  try {
    raw = JSON.parse(fs.readFileSync(filePath, "utf-8"));
  } catch (e) {
    throw new ModelFormatError(`cannot parse model file ${filePath}: ${e}`);
  }
  if (raw.version !== 1) {
    throw new ModelFormatError(`unsupported model file version in ${filePath}`);
  }
  const model: BackboneModel = {
    name: String(raw.name),
    inputSize: raw.input_size,
    D: raw.D,
    mean: raw.mean,
    std: raw.std,
    trunk: (raw.trunk as any[]).map((l, i) => parseDense(l, `trunk[${i}]`)),
    embeddingHead: parseDense(raw.heads.embedding, "heads.embedding"),
    logitsHead: parseDense(raw.heads.logits, "heads.logits"),
    vaHead: raw.heads.va == null ? null : parseDense(raw.heads.va, "heads.va"),
  };
  if (model.embeddingHead.rows !== model.D) {
    throw new ModelFormatError("embedding head rows disagree with header D");
  }
  if (model.logitsHead.rows !== N_LOGITS) {
    throw new ModelFormatError(`logits head must have ${N_LOGITS} rows`);
  }
  if (model.vaHead && model.vaHead.rows !== 2) {
    throw new ModelFormatError("va head must have 2 rows");
  }
  return model;
}

function applyDense(layer: Dense, x: Float64Array): Float64Array {
  if (x.length !== layer.cols) {
    throw new ModelFormatError(
      `dense layer expects ${layer.cols} inputs, got ${x.length}`,
    );
  }
  const y = new Float64Array(layer.rows);
  for (let r = 0; r < layer.rows; r++) {
    let acc = layer.b[r];
    const off = r * layer.cols;
    for (let c = 0; c < layer.cols; c++) acc += layer.W[off + c] * x[c];
    y[r] = acc;
  }
  return y;
}

export interface FrameOutputs {
  valence: number;
  arousal: number;
  logits: Float64Array;
  embedding: Float64Array;
}

/** Forward pass over one preprocessed image vector (length 3*S*S). */
export function forward(model: BackboneModel, x: Float64Array): FrameOutputs {
  let h = x;
  for (const layer of model.trunk) {
    h = applyDense(layer, h);
    for (let i = 0; i < h.length; i++) if (h[i] < 0) h[i] = 0;
  }
  const embedding = applyDense(model.embeddingHead, h);
  const logits = applyDense(model.logitsHead, h);
  let valence = 0;
  let arousal = 0;
  if (model.vaHead) {
    const va = applyDense(model.vaHead, h);
    valence = Math.tanh(va[0]);
    arousal = Math.tanh(va[1]);
  }
  return { valence, arousal, logits, embedding };
}
