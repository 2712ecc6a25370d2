export { extract, frameIndexFromName, fmt, InputError } from "./extract";
export type { ExtractionJob, ExtractionReport } from "./extract";
export {
  AFFECTNET_ORDER,
  KNOWN_MODELS,
  N_LOGITS,
  MissingWeightsError,
  ModelFormatError,
  forward,
  loadModel,
  resolveModelPath,
} from "./model";
export type { BackboneModel, Dense, FrameOutputs } from "./model";
export { decodePng, preprocess, ImageDecodeError } from "./image";
