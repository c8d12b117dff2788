// Readers for the toolkit's external formats (vocab files, text and binary
// embedding matrices, manifests) plus digest verification and CLI invocation.

import { createHash } from "node:crypto";
import { spawnSync } from "node:child_process";
import { readFileSync, writeFileSync } from "node:fs";
import { dirname, join } from "node:path";

export class DigestMismatch extends Error {}

export function sha256File(path: string): string {
  return createHash("sha256").update(readFileSync(path)).digest("hex");
}

export function runCli(args: string[], label: string): void {
  const result = spawnSync("python3", ["-m", "vocabtransfer.cli", ...args], {
    encoding: "utf-8",
  });
  if (result.status !== 0) {
    throw new Error(
      `${label} failed (exit ${result.status}): ${result.stderr || result.stdout}`,
    );
  }
}

export interface Vocab {
  surfaces: string[];
  idOf: Map<string, number>;
  padId: number;
  unkId: number;
  maskId: number;
}

export function readVocab(path: string): Vocab {
  const surfaces = readFileSync(path, "utf-8").split("\n");
  if (surfaces[surfaces.length - 1] === "") surfaces.pop();
  const idOf = new Map<string, number>();
  surfaces.forEach((s, i) => idOf.set(s, i));
  const need = (name: string): number => {
    const id = idOf.get(name);
    if (id === undefined) throw new Error(`vocabulary ${path} lacks ${name}`);
    return id;
  };
  return {
    surfaces,
    idOf,
    padId: need("[PAD]"),
    unkId: need("[UNK]"),
    maskId: need("[MASK]"),
  };
}

export interface Matrix {
  rows: number;
  cols: number;
  data: Float64Array;
}

export function readMatrixText(path: string): Matrix {
  const lines = readFileSync(path, "utf-8").split("\n");
  if (lines[lines.length - 1] === "") lines.pop();
  const rows = lines.length;
  const first = lines[0].split(" ").length;
  const data = new Float64Array(rows * first);
  for (let i = 0; i < rows; i++) {
    const parts = lines[i].split(" ");
    if (parts.length !== first) throw new Error(`${path}: ragged row ${i}`);
    for (let j = 0; j < first; j++) data[i * first + j] = Number(parts[j]);
  }
  return { rows, cols: first, data };
}

export function readMatrixBinary(path: string): Matrix {
  const buf = readFileSync(path);
  if (buf.subarray(0, 4).toString("latin1") !== "VTEM") {
    throw new Error(`${path}: bad magic`);
  }
  const version = buf.readUInt32LE(4);
  if (version !== 1) throw new Error(`${path}: unsupported version ${version}`);
  const rows = Number(buf.readBigUInt64LE(8));
  const cols = Number(buf.readBigUInt64LE(16));
  const expected = 24 + rows * cols * 4;
  if (buf.length !== expected) {
    throw new Error(`${path}: size mismatch (${buf.length} vs ${expected})`);
  }
  const data = new Float64Array(rows * cols);
  for (let i = 0; i < rows * cols; i++) data[i] = buf.readFloatLE(24 + i * 4);
  return { rows, cols, data };
}

export function writeMatrixText(path: string, m: Matrix): void {
  const lines: string[] = [];
  for (let i = 0; i < m.rows; i++) {
    const row: string[] = [];
    for (let j = 0; j < m.cols; j++) {
      // snap to float32 first; the shortest repr then round-trips exactly
      row.push(String(Math.fround(m.data[i * m.cols + j])));
    }
    lines.push(row.join(" "));
  }
  writeFileSync(path, lines.join("\n") + "\n");
}

export interface Manifest {
  dir: string;
  doc: {
    mode: string;
    sizes: number[];
    artifacts: { role: string; path: string; size?: number; sha256: string }[];
  };
}

export function readManifest(path: string): Manifest {
  return { dir: dirname(path), doc: JSON.parse(readFileSync(path, "utf-8")) };
}

// recompute every artifact digest before consuming anything
export function verifyManifest(manifest: Manifest): void {
  for (const artifact of manifest.doc.artifacts) {
    const actual = sha256File(join(manifest.dir, artifact.path));
    if (actual !== artifact.sha256) {
      throw new DigestMismatch(
        `${artifact.path}: manifest says ${artifact.sha256}, file is ${actual}`,
      );
    }
  }
}

export function manifestArtifact(
  manifest: Manifest, role: string, size?: number,
): string {
  const hit = manifest.doc.artifacts.find(
    (a) => a.role === role && (size === undefined || a.size === size),
  );
  if (!hit) throw new Error(`manifest has no ${role} artifact for size ${size}`);
  return join(manifest.dir, hit.path);
}

export function readEncodedLines(path: string): Int32Array[] {
  const lines = readFileSync(path, "utf-8").split("\n");
  if (lines[lines.length - 1] === "") lines.pop();
  return lines.map((line) => {
    if (line === "") return new Int32Array(0);
    return Int32Array.from(line.split(" "), Number);
  });
}

export function readLabels(path: string): number[] {
  const lines = readFileSync(path, "utf-8").split("\n");
  if (lines[lines.length - 1] === "") lines.pop();
  return lines.map(Number);
}
