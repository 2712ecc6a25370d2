/**
 * Generates the deterministic test fixtures:
 *   models/tiny.json          - a small bundled backbone (D=16, 8x8 input)
 *   fixtures/images/          - 2 videos x 5 PNG frames (the 10-image set)
 *
 * Everything is seeded, so rerunning reproduces identical bytes.
 */
import * as fs from "fs";
import * as path from "path";
import { PNG } from "pngjs";

const ROOT = path.join(__dirname, "..");

/** mulberry32: tiny deterministic PRNG, plenty for fixtures */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function encodeF64(values: number[]): string {
  const buf = Buffer.alloc(values.length * 8);
  values.forEach((v, i) => buf.writeDoubleLE(v, i * 8));
  return buf.toString("base64");
}

function dense(rng: () => number, rows: number, cols: number, scale: number) {
  const w: number[] = [];
  for (let i = 0; i < rows * cols; i++) w.push((rng() * 2 - 1) * scale);
  const b: number[] = [];
  for (let i = 0; i < rows; i++) b.push((rng() * 2 - 1) * scale * 0.1);
  return { rows, cols, W: encodeF64(w), b: encodeF64(b) };
}

function makeTinyModel(): void {
  const rng = mulberry32(20240826);
  const S = 8;
  const D = 16;
  const hidden = 24;
  const model = {
    version: 1,
    name: "tiny",
    input_size: S,
    D,
    mean: [0.485, 0.456, 0.406],
    std: [0.229, 0.224, 0.225],
    trunk: [dense(rng, hidden, 3 * S * S, 0.08)],
    heads: {
      embedding: dense(rng, D, hidden, 0.3),
      logits: dense(rng, 8, hidden, 0.3),
      va: dense(rng, 2, hidden, 0.2),
    },
  };
  const out = path.join(ROOT, "models", "tiny.json");
  fs.mkdirSync(path.dirname(out), { recursive: true });
  fs.writeFileSync(out, JSON.stringify(model) + "\n", "utf-8");
  console.error(`wrote ${out}`);
}

function makeImages(): void {
  const rng = mulberry32(77);
  const root = path.join(ROOT, "fixtures", "images");
  fs.rmSync(root, { recursive: true, force: true });
  for (const video of ["vid_a", "vid_b"]) {
    const dir = path.join(root, video);
    fs.mkdirSync(dir, { recursive: true });
    for (let frame = 0; frame < 5; frame++) {
      const size = 12 + Math.floor(rng() * 8); // varied sizes exercise resize
      const png = new PNG({ width: size, height: size });
      for (let i = 0; i < size * size; i++) {
        png.data[i * 4] = Math.floor(rng() * 256);
        png.data[i * 4 + 1] = Math.floor(rng() * 256);
        png.data[i * 4 + 2] = Math.floor(rng() * 256);
        png.data[i * 4 + 3] = 255;
      }
      const file = path.join(dir, `frame_${String(frame).padStart(5, "0")}.png`);
      fs.writeFileSync(file, PNG.sync.write(png));
    }
  }
  console.error(`wrote 10 images under ${root}`);
}

makeTinyModel();
makeImages();
