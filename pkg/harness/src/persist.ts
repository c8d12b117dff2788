// Body-weight persistence and in-memory parameter snapshots. JSON of plain
// number arrays: doubles round-trip exactly, and only this harness reads it.

import { readFileSync, writeFileSync } from "node:fs";
import { TinyBert } from "./model.js";
import { Tensor } from "./tensor.js";

export function bodyToJson(model: TinyBert): string {
  const params = model.bodyParams().map((p) => Array.from(p.data));
  return JSON.stringify({ dims: bodyDims(model), params });
}

function bodyDims(model: TinyBert): number[][] {
  return model.bodyParams().map((p) => [p.rows, p.cols]);
}

export function saveBody(model: TinyBert, path: string): void {
  writeFileSync(path, bodyToJson(model));
}

export function loadBodyInto(model: TinyBert, path: string): void {
  const doc = JSON.parse(readFileSync(path, "utf-8")) as {
    dims: number[][];
    params: number[][];
  };
  const targets = model.bodyParams();
  if (doc.params.length !== targets.length) {
    throw new Error("body parameter count mismatch");
  }
  for (let i = 0; i < targets.length; i++) {
    const t = targets[i];
    if (doc.dims[i][0] !== t.rows || doc.dims[i][1] !== t.cols) {
      throw new Error(`body parameter ${i} shape mismatch`);
    }
    t.data.set(doc.params[i]);
  }
}

export function allParams(model: TinyBert): Tensor[] {
  return [model.tokenEmb, ...model.bodyParams(), model.clsW, model.clsB];
}

export function snapshot(model: TinyBert): Float64Array[] {
  return allParams(model).map((p) => p.data.slice());
}

export function restore(model: TinyBert, saved: Float64Array[]): void {
  const params = allParams(model);
  for (let i = 0; i < params.length; i++) params[i].data.set(saved[i]);
}
