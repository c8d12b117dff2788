// MLM and classifier training loops, plus window/batch assembly. Everything
// is driven by explicit Rng instances so runs are reproducible bit-for-bit.

import { Rng } from "./rng.js";
import { Adam, TinyBert, argmaxRows } from "./model.js";
import { Tape, crossEntropy } from "./tensor.js";

export interface MlmBatch {
  ids: Int32Array; // flattened [batch*seqLen], already masked
  positions: Int32Array; // flattened indices of masked slots
  targets: Int32Array; // original ids at those slots
  batch: number;
}

// fixed-length windows over the concatenated corpus (no padding needed)
export function makeWindows(lines: Int32Array[], seqLen: number): Int32Array[] {
  let total = 0;
  for (const line of lines) total += line.length;
  const flat = new Int32Array(total);
  let at = 0;
  for (const line of lines) {
    flat.set(line, at);
    at += line.length;
  }
  const windows: Int32Array[] = [];
  for (let start = 0; start + seqLen <= flat.length; start += seqLen) {
    windows.push(flat.subarray(start, start + seqLen).slice());
  }
  return windows;
}

export function makeMlmBatch(
  windows: Int32Array[], batch: number, seqLen: number,
  vocabSize: number, maskId: number, padId: number, rng: Rng,
): MlmBatch {
  const ids = new Int32Array(batch * seqLen);
  for (let b = 0; b < batch; b++) {
    ids.set(windows[rng.int(windows.length)], b * seqLen);
  }
  const positions: number[] = [];
  const targets: number[] = [];
  for (let i = 0; i < ids.length; i++) {
    if (ids[i] === padId) continue;
    if (rng.next() >= 0.15) continue;
    positions.push(i);
    targets.push(ids[i]);
    const roll = rng.next();
    if (roll < 0.8) ids[i] = maskId;
    else if (roll < 0.9) ids[i] = rng.int(vocabSize);
  }
  if (positions.length === 0) {
    // degenerate draw: force one mask so the loss is defined
    positions.push(0);
    targets.push(ids[0]);
    ids[0] = maskId;
  }
  return {
    ids,
    positions: Int32Array.from(positions),
    targets: Int32Array.from(targets),
    batch,
  };
}

export function mlmLossOn(model: TinyBert, batch: MlmBatch): number {
  const tape = new Tape();
  return model.mlmLoss(tape, batch.ids, batch.batch, batch.positions, batch.targets)
    .data[0];
}

export function trainMlm(
  model: TinyBert, windows: Int32Array[], steps: number, batch: number,
  lr: number, maskId: number, padId: number, rng: Rng,
): number {
  const { seqLen, vocabSize } = model.cfg;
  const optimizer = new Adam(model.mlmParams(), lr);
  let last = 0;
  for (let step = 0; step < steps; step++) {
    const mlmBatch = makeMlmBatch(
      windows, batch, seqLen, vocabSize, maskId, padId, rng,
    );
    const tape = new Tape();
    const loss = model.mlmLoss(
      tape, mlmBatch.ids, mlmBatch.batch, mlmBatch.positions, mlmBatch.targets,
    );
    optimizer.zeroGrad();
    tape.backward(loss);
    optimizer.step();
    last = loss.data[0];
  }
  return last;
}

export interface Example {
  ids: Int32Array; // padded/cropped to seqLen
  len: number;
  label: number;
}

export function makeExamples(
  lines: Int32Array[], labels: number[], seqLen: number, padId: number,
): Example[] {
  const examples: Example[] = [];
  for (let i = 0; i < lines.length; i++) {
    const ids = new Int32Array(seqLen).fill(padId);
    const n = Math.min(lines[i].length, seqLen);
    ids.set(lines[i].subarray(0, n));
    examples.push({ ids, len: n, label: labels[i] });
  }
  return examples;
}

export function trainClassifier(
  model: TinyBert, examples: Example[], steps: number, batch: number,
  lr: number, rng: Rng,
): void {
  const { seqLen } = model.cfg;
  const optimizer = new Adam(model.classifierParams(), lr);
  const order = examples.map((_, i) => i);
  let cursor = order.length; // forces an initial shuffle
  for (let step = 0; step < steps; step++) {
    const ids = new Int32Array(batch * seqLen);
    const lens = new Int32Array(batch);
    const labels = new Int32Array(batch);
    for (let b = 0; b < batch; b++) {
      if (cursor >= order.length) {
        rng.shuffle(order);
        cursor = 0;
      }
      const ex = examples[order[cursor++]];
      ids.set(ex.ids, b * seqLen);
      lens[b] = ex.len;
      labels[b] = ex.label;
    }
    const tape = new Tape();
    const logits = model.classifierLogits(tape, ids, batch, lens);
    const loss = crossEntropy(tape, logits, labels);
    optimizer.zeroGrad();
    tape.backward(loss);
    optimizer.step();
  }
}

export function evalAccuracy(
  model: TinyBert, examples: Example[], batch = 30,
): number {
  const { seqLen } = model.cfg;
  let correct = 0;
  for (let start = 0; start < examples.length; start += batch) {
    const chunk = examples.slice(start, start + batch);
    const ids = new Int32Array(chunk.length * seqLen);
    const lens = new Int32Array(chunk.length);
    for (let b = 0; b < chunk.length; b++) {
      ids.set(chunk[b].ids, b * seqLen);
      lens[b] = chunk[b].len;
    }
    const tape = new Tape();
    const logits = model.classifierLogits(tape, ids, chunk.length, lens);
    const preds = argmaxRows(logits);
    for (let b = 0; b < chunk.length; b++) {
      if (preds[b] === chunk[b].label) correct++;
    }
  }
  return correct / examples.length;
}
