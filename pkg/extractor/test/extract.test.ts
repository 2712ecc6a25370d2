import * as fs from "fs";
import * as os from "os";
import * as path from "path";
import { beforeAll, describe, expect, it } from "vitest";

import { extract, frameIndexFromName } from "../src/extract";
import {
  MissingWeightsError,
  forward,
  loadModel,
  resolveModelPath,
} from "../src/model";
import { decodePng, preprocess } from "../src/image";
import { run } from "../src/cli";

const ROOT = path.join(__dirname, "..");
const IMAGES = path.join(ROOT, "fixtures", "images");
const TINY = path.join(ROOT, "models", "tiny.json");

function tmpdir(): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), "extract-test-"));
}

interface Parsed {
  header: any;
  rows: string[][];
}

function parseFeatureFile(p: string): Parsed {
  const lines = fs.readFileSync(p, "utf-8").trim().split("\n");
  const header = JSON.parse(lines[0]);
  const rows = lines.slice(1).map((l) => l.split(","));
  return { header, rows };
}

describe("frameIndexFromName", () => {
  it("takes the trailing integer before the extension", () => {
    expect(frameIndexFromName("frame_00012.png")).toBe(12);
    expect(frameIndexFromName("00001.png")).toBe(1);
    expect(frameIndexFromName("shot7_frame3.png")).toBe(3);
    expect(frameIndexFromName("noindex.png")).toBeNull();
  });
});

describe("model resolution", () => {
  it("is fatal with a download hint when weights are absent", () => {
    expect(() => resolveModelPath("emotieffnet_b0")).toThrow(MissingWeightsError);
    expect(() => resolveModelPath("emotieffnet_b0")).toThrow(/download/);
    expect(() => resolveModelPath("no_such_model")).toThrow(/unknown model/);
  });

  it("accepts a direct path to a model json", () => {
    expect(resolveModelPath(TINY)).toBe(TINY);
  });
});

describe("extraction on the 10-image fixture", () => {
  const model = loadModel(TINY);
  let out: string;
  let parsed: Parsed;

  beforeAll(() => {
    out = path.join(tmpdir(), "features.csv");
    const report = extract({ inputRoot: IMAGES, model, outPath: out, log: () => {} });
    expect(report.rows).toBe(10);
    expect(report.videos).toBe(2);
    expect(report.skipped).toEqual([]);
    parsed = parseFeatureFile(out);
  });

  it("writes one row per image with the declared column count", () => {
    expect(parsed.rows.length).toBe(10);
    const nCols = 4 + 8 + parsed.header.D;
    for (const row of parsed.rows) expect(row.length).toBe(nCols);
    expect(parsed.header.columns.length).toBe(nCols);
  });

  it("declares version 1, D, the logit order, and the VA flag", () => {
    expect(parsed.header.version).toBe(1);
    expect(parsed.header.D).toBe(model.D);
    expect(parsed.header.logit_order[5]).toBe("Neutral");
    expect(parsed.header.va).toBe(true);
  });

  it("keeps valence and arousal within [-1, 1]", () => {
    for (const row of parsed.rows) {
      const v = parseFloat(row[2]);
      const a = parseFloat(row[3]);
      expect(Math.abs(v)).toBeLessThanOrEqual(1);
      expect(Math.abs(a)).toBeLessThanOrEqual(1);
      expect(Number.isFinite(v) && Number.isFinite(a)).toBe(true);
    }
  });

  it("is deterministic: the same image yields identical rows", () => {
    const img = path.join(IMAGES, "vid_a", "frame_00000.png");
    const x = preprocess(decodePng(img), model);
    const a = forward(model, x);
    const b = forward(model, preprocess(decodePng(img), model));
    expect(Array.from(b.embedding)).toEqual(Array.from(a.embedding));
    expect(Array.from(b.logits)).toEqual(Array.from(a.logits));
    expect(b.valence).toBe(a.valence);
    expect(b.arousal).toBe(a.arousal);
  });

  it("writes byte-identical output on rerun", () => {
    const out2 = path.join(tmpdir(), "features.csv");
    extract({ inputRoot: IMAGES, model, outPath: out2, log: () => {} });
    expect(fs.readFileSync(out2)).toEqual(fs.readFileSync(out));
  });
});

describe("error handling", () => {
  const model = loadModel(TINY);

  it("skips unreadable images with a log line", () => {
    const root = tmpdir();
    const dir = path.join(root, "vid_x");
    fs.mkdirSync(dir);
    fs.copyFileSync(
      path.join(IMAGES, "vid_a", "frame_00000.png"),
      path.join(dir, "frame_00000.png"),
    );
    fs.writeFileSync(path.join(dir, "frame_00001.png"), "not a png");
    const logged: string[] = [];
    const report = extract({
      inputRoot: root,
      model,
      outPath: path.join(root, "out.csv"),
      log: (m) => logged.push(m),
    });
    expect(report.rows).toBe(1);
    expect(report.skipped).toEqual([path.join("vid_x", "frame_00001.png")]);
    expect(logged.some((m) => m.includes("frame_00001.png"))).toBe(true);
  });

  it("rejects an empty input root", () => {
    expect(() =>
      extract({ inputRoot: tmpdir(), model, outPath: "/tmp/x.csv", log: () => {} }),
    ).toThrow(/no video folders/);
  });
});

describe("cli", () => {
  it("returns 0 on success and writes the file", () => {
    const out = path.join(tmpdir(), "cli.csv");
    expect(run(["--input", IMAGES, "--model", TINY, "--out", out])).toBe(0);
    expect(parseFeatureFile(out).rows.length).toBe(10);
  });

  it("returns 2 for missing weights and 3 for bad input", () => {
    expect(run(["--input", IMAGES, "--model", "mt_emotieffnet_b0", "--out", "/tmp/x"]))
      .toBe(2);
    expect(run(["--input", "/no/such/dir", "--model", TINY, "--out", "/tmp/x"]))
      .toBe(3);
  });
});
