// Minimal dense-matrix autograd: enough for a tiny bidirectional transformer.
// Tensors are row-major Float64Array matrices; a Tape records backward
// closures in execution order and replays them reversed.

import { Rng } from "./rng.js";

export class Tensor {
  readonly rows: number;
  readonly cols: number;
  data: Float64Array;
  grad: Float64Array | null;

  constructor(rows: number, cols: number, data?: Float64Array, withGrad = false) {
    this.rows = rows;
    this.cols = cols;
    this.data = data ?? new Float64Array(rows * cols);
    if (this.data.length !== rows * cols) {
      throw new Error(`tensor data length ${this.data.length} != ${rows}x${cols}`);
    }
    this.grad = withGrad ? new Float64Array(rows * cols) : null;
  }

  static param(rows: number, cols: number, rng: Rng, std = 0.02): Tensor {
    const t = new Tensor(rows, cols, undefined, true);
    for (let i = 0; i < t.data.length; i++) t.data[i] = rng.gauss(0, std);
    return t;
  }

  static filled(rows: number, cols: number, value: number, withGrad = false): Tensor {
    const t = new Tensor(rows, cols, undefined, withGrad);
    t.data.fill(value);
    return t;
  }

  needsGrad(): boolean {
    return this.grad !== null;
  }

  zeroGrad(): void {
    this.grad?.fill(0);
  }

  clone(): Tensor {
    return new Tensor(this.rows, this.cols, this.data.slice(), this.grad !== null);
  }
}

export class Tape {
  private ops: Array<() => void> = [];

  record(op: () => void): void {
    this.ops.push(op);
  }

  backward(loss: Tensor): void {
    if (loss.rows !== 1 || loss.cols !== 1 || !loss.grad) {
      throw new Error("backward expects a scalar tensor with grad");
    }
    loss.grad[0] = 1;
    for (let i = this.ops.length - 1; i >= 0; i--) this.ops[i]();
  }
}

function out(rows: number, cols: number, needsGrad: boolean): Tensor {
  return new Tensor(rows, cols, undefined, needsGrad);
}

// C[m,n] = A[m,k] * B[k,n], ikj loop order for cache-friendly accumulation
export function mmNN(
  a: Float64Array, b: Float64Array, c: Float64Array,
  m: number, k: number, n: number, accumulate = false,
): void {
  if (!accumulate) c.fill(0, 0, m * n);
  for (let i = 0; i < m; i++) {
    const ai = i * k;
    const ci = i * n;
    for (let p = 0; p < k; p++) {
      const av = a[ai + p];
      if (av === 0) continue;
      const bp = p * n;
      for (let j = 0; j < n; j++) c[ci + j] += av * b[bp + j];
    }
  }
}

// C[m,n] = A[m,k] * B[n,k]^T
export function mmNT(
  a: Float64Array, b: Float64Array, c: Float64Array,
  m: number, k: number, n: number, accumulate = false,
): void {
  for (let i = 0; i < m; i++) {
    const ai = i * k;
    const ci = i * n;
    for (let j = 0; j < n; j++) {
      const bj = j * k;
      let acc = 0;
      for (let p = 0; p < k; p++) acc += a[ai + p] * b[bj + p];
      if (accumulate) c[ci + j] += acc;
      else c[ci + j] = acc;
    }
  }
}

// C[k,n] = A[m,k]^T * B[m,n]
export function mmTN(
  a: Float64Array, b: Float64Array, c: Float64Array,
  m: number, k: number, n: number, accumulate = false,
): void {
  if (!accumulate) c.fill(0, 0, k * n);
  for (let i = 0; i < m; i++) {
    const ai = i * k;
    const bi = i * n;
    for (let p = 0; p < k; p++) {
      const av = a[ai + p];
      if (av === 0) continue;
      const cp = p * n;
      for (let j = 0; j < n; j++) c[cp + j] += av * b[bi + j];
    }
  }
}

export function matmul(tape: Tape, a: Tensor, b: Tensor): Tensor {
  if (a.cols !== b.rows) throw new Error(`matmul shapes ${a.cols} vs ${b.rows}`);
  const needs = a.needsGrad() || b.needsGrad();
  const c = out(a.rows, b.cols, needs);
  mmNN(a.data, b.data, c.data, a.rows, a.cols, b.cols);
  if (needs) {
    tape.record(() => {
      const dc = c.grad!;
      if (a.grad) mmNT(dc, b.data, a.grad, a.rows, b.cols, a.cols, true);
      if (b.grad) mmTN(a.data, dc, b.grad, a.rows, a.cols, b.cols, true);
    });
  }
  return c;
}

export function add(tape: Tape, a: Tensor, b: Tensor): Tensor {
  if (a.rows !== b.rows || a.cols !== b.cols) throw new Error("add shape mismatch");
  const needs = a.needsGrad() || b.needsGrad();
  const c = out(a.rows, a.cols, needs);
  for (let i = 0; i < c.data.length; i++) c.data[i] = a.data[i] + b.data[i];
  if (needs) {
    tape.record(() => {
      const dc = c.grad!;
      if (a.grad) for (let i = 0; i < dc.length; i++) a.grad[i] += dc[i];
      if (b.grad) for (let i = 0; i < dc.length; i++) b.grad[i] += dc[i];
    });
  }
  return c;
}

// X[n,d] + bias[1,d] broadcast over rows
export function addBias(tape: Tape, x: Tensor, bias: Tensor): Tensor {
  if (bias.rows !== 1 || bias.cols !== x.cols) throw new Error("bias shape");
  const needs = x.needsGrad() || bias.needsGrad();
  const c = out(x.rows, x.cols, needs);
  for (let i = 0; i < x.rows; i++) {
    const o = i * x.cols;
    for (let j = 0; j < x.cols; j++) c.data[o + j] = x.data[o + j] + bias.data[j];
  }
  if (needs) {
    tape.record(() => {
      const dc = c.grad!;
      if (x.grad) for (let i = 0; i < dc.length; i++) x.grad[i] += dc[i];
      if (bias.grad) {
        for (let i = 0; i < x.rows; i++) {
          const o = i * x.cols;
          for (let j = 0; j < x.cols; j++) bias.grad[j] += dc[o + j];
        }
      }
    });
  }
  return c;
}

// tanh-approximation GELU
export function gelu(tape: Tape, x: Tensor): Tensor {
  const needs = x.needsGrad();
  const c = out(x.rows, x.cols, needs);
  const k = Math.sqrt(2 / Math.PI);
  for (let i = 0; i < x.data.length; i++) {
    const v = x.data[i];
    c.data[i] = 0.5 * v * (1 + Math.tanh(k * (v + 0.044715 * v * v * v)));
  }
  if (needs) {
    tape.record(() => {
      const dc = c.grad!;
      for (let i = 0; i < x.data.length; i++) {
        const v = x.data[i];
        const inner = k * (v + 0.044715 * v * v * v);
        const t = Math.tanh(inner);
        const sech2 = 1 - t * t;
        const dinner = k * (1 + 3 * 0.044715 * v * v);
        x.grad![i] += dc[i] * (0.5 * (1 + t) + 0.5 * v * sech2 * dinner);
      }
    });
  }
  return c;
}

export function layerNorm(
  tape: Tape, x: Tensor, gain: Tensor, bias: Tensor, eps = 1e-5,
): Tensor {
  const d = x.cols;
  if (gain.cols !== d || bias.cols !== d) throw new Error("layerNorm shapes");
  const needs = x.needsGrad() || gain.needsGrad() || bias.needsGrad();
  const c = out(x.rows, d, needs);
  const xhat = new Float64Array(x.rows * d);
  const invStd = new Float64Array(x.rows);
  for (let i = 0; i < x.rows; i++) {
    const o = i * d;
    let mean = 0;
    for (let j = 0; j < d; j++) mean += x.data[o + j];
    mean /= d;
    let varAcc = 0;
    for (let j = 0; j < d; j++) {
      const dv = x.data[o + j] - mean;
      varAcc += dv * dv;
    }
    const inv = 1 / Math.sqrt(varAcc / d + eps);
    invStd[i] = inv;
    for (let j = 0; j < d; j++) {
      const h = (x.data[o + j] - mean) * inv;
      xhat[o + j] = h;
      c.data[o + j] = h * gain.data[j] + bias.data[j];
    }
  }
  if (needs) {
    tape.record(() => {
      const dc = c.grad!;
      for (let i = 0; i < x.rows; i++) {
        const o = i * d;
        if (gain.grad || bias.grad) {
          for (let j = 0; j < d; j++) {
            if (gain.grad) gain.grad[j] += dc[o + j] * xhat[o + j];
            if (bias.grad) bias.grad[j] += dc[o + j];
          }
        }
        if (x.grad) {
          let sumDh = 0;
          let sumDhXhat = 0;
          for (let j = 0; j < d; j++) {
            const dh = dc[o + j] * gain.data[j];
            sumDh += dh;
            sumDhXhat += dh * xhat[o + j];
          }
          const inv = invStd[i];
          for (let j = 0; j < d; j++) {
            const dh = dc[o + j] * gain.data[j];
            x.grad[o + j] +=
              inv * (dh - sumDh / d - (xhat[o + j] * sumDhXhat) / d);
          }
        }
      }
    });
  }
  return c;
}

// rows of an embedding table by id; backward scatter-adds
export function gatherRows(tape: Tape, table: Tensor, ids: Int32Array): Tensor {
  const d = table.cols;
  const needs = table.needsGrad();
  const c = out(ids.length, d, needs);
  for (let i = 0; i < ids.length; i++) {
    c.data.set(table.data.subarray(ids[i] * d, ids[i] * d + d), i * d);
  }
  if (needs) {
    tape.record(() => {
      const dc = c.grad!;
      for (let i = 0; i < ids.length; i++) {
        const src = i * d;
        const dst = ids[i] * d;
        for (let j = 0; j < d; j++) table.grad![dst + j] += dc[src + j];
      }
    });
  }
  return c;
}

// mean over the first lens[b] rows of each length-T segment
export function meanPool(
  tape: Tape, x: Tensor, batch: number, seqLen: number, lens: Int32Array,
): Tensor {
  const d = x.cols;
  const needs = x.needsGrad();
  const c = out(batch, d, needs);
  for (let b = 0; b < batch; b++) {
    const n = Math.max(1, Math.min(lens[b], seqLen));
    const o = b * d;
    for (let t = 0; t < n; t++) {
      const r = (b * seqLen + t) * d;
      for (let j = 0; j < d; j++) c.data[o + j] += x.data[r + j];
    }
    for (let j = 0; j < d; j++) c.data[o + j] /= n;
  }
  if (needs) {
    tape.record(() => {
      const dc = c.grad!;
      for (let b = 0; b < batch; b++) {
        const n = Math.max(1, Math.min(lens[b], seqLen));
        const o = b * d;
        for (let t = 0; t < n; t++) {
          const r = (b * seqLen + t) * d;
          for (let j = 0; j < d; j++) x.grad![r + j] += dc[o + j] / n;
        }
      }
    });
  }
  return c;
}

// bidirectional multi-head attention over a flattened [batch*seqLen, dim] input
export function attention(
  tape: Tape, q: Tensor, k: Tensor, v: Tensor,
  batch: number, seqLen: number, heads: number,
): Tensor {
  const d = q.cols;
  const dh = d / heads;
  if (!Number.isInteger(dh)) throw new Error("dim not divisible by heads");
  const scale = 1 / Math.sqrt(dh);
  const needs = q.needsGrad() || k.needsGrad() || v.needsGrad();
  const c = out(q.rows, d, needs);
  // cache softmax probabilities per (batch, head): batch*heads*T*T
  const probs = new Float64Array(batch * heads * seqLen * seqLen);
  const scores = new Float64Array(seqLen);
  for (let b = 0; b < batch; b++) {
    for (let h = 0; h < heads; h++) {
      const hOff = h * dh;
      const pBase = (b * heads + h) * seqLen * seqLen;
      for (let i = 0; i < seqLen; i++) {
        const qi = (b * seqLen + i) * d + hOff;
        let maxS = -Infinity;
        for (let j = 0; j < seqLen; j++) {
          const kj = (b * seqLen + j) * d + hOff;
          let acc = 0;
          for (let p = 0; p < dh; p++) acc += q.data[qi + p] * k.data[kj + p];
          acc *= scale;
          scores[j] = acc;
          if (acc > maxS) maxS = acc;
        }
        let z = 0;
        for (let j = 0; j < seqLen; j++) {
          const e = Math.exp(scores[j] - maxS);
          scores[j] = e;
          z += e;
        }
        const pRow = pBase + i * seqLen;
        for (let j = 0; j < seqLen; j++) probs[pRow + j] = scores[j] / z;
        const oi = (b * seqLen + i) * d + hOff;
        for (let j = 0; j < seqLen; j++) {
          const pij = probs[pRow + j];
          if (pij === 0) continue;
          const vj = (b * seqLen + j) * d + hOff;
          for (let p = 0; p < dh; p++) c.data[oi + p] += pij * v.data[vj + p];
        }
      }
    }
  }
  if (needs) {
    tape.record(() => {
      const dc = c.grad!;
      const dP = new Float64Array(seqLen);
      for (let b = 0; b < batch; b++) {
        for (let h = 0; h < heads; h++) {
          const hOff = h * dh;
          const pBase = (b * heads + h) * seqLen * seqLen;
          for (let i = 0; i < seqLen; i++) {
            const oi = (b * seqLen + i) * d + hOff;
            const pRow = pBase + i * seqLen;
            // dP and dV
            let dot = 0;
            for (let j = 0; j < seqLen; j++) {
              const vj = (b * seqLen + j) * d + hOff;
              let acc = 0;
              for (let p = 0; p < dh; p++) acc += dc[oi + p] * v.data[vj + p];
              dP[j] = acc;
              dot += acc * probs[pRow + j];
              if (v.grad) {
                const pij = probs[pRow + j];
                for (let p = 0; p < dh; p++) v.grad[vj + p] += pij * dc[oi + p];
              }
            }
            // softmax backward into dScores (reuse dP), then dQ/dK
            const qi = (b * seqLen + i) * d + hOff;
            for (let j = 0; j < seqLen; j++) {
              const ds = probs[pRow + j] * (dP[j] - dot) * scale;
              if (ds === 0) continue;
              const kj = (b * seqLen + j) * d + hOff;
              if (q.grad) {
                for (let p = 0; p < dh; p++) q.grad[qi + p] += ds * k.data[kj + p];
              }
              if (k.grad) {
                for (let p = 0; p < dh; p++) k.grad[kj + p] += ds * q.data[qi + p];
              }
            }
          }
        }
      }
    });
  }
  return c;
}

// mean cross-entropy over the selected rows of logits
export function crossEntropy(
  tape: Tape, logits: Tensor, targets: Int32Array,
): Tensor {
  const n = logits.rows;
  const v = logits.cols;
  if (targets.length !== n) throw new Error("targets length mismatch");
  const needs = logits.needsGrad();
  const loss = out(1, 1, needs);
  const probs = new Float64Array(n * v);
  let total = 0;
  for (let i = 0; i < n; i++) {
    const o = i * v;
    let maxL = -Infinity;
    for (let j = 0; j < v; j++) if (logits.data[o + j] > maxL) maxL = logits.data[o + j];
    let z = 0;
    for (let j = 0; j < v; j++) {
      const e = Math.exp(logits.data[o + j] - maxL);
      probs[o + j] = e;
      z += e;
    }
    for (let j = 0; j < v; j++) probs[o + j] /= z;
    total += -Math.log(Math.max(probs[o + targets[i]], 1e-12));
  }
  loss.data[0] = total / n;
  if (needs) {
    tape.record(() => {
      const g = loss.grad![0] / n;
      for (let i = 0; i < n; i++) {
        const o = i * v;
        for (let j = 0; j < v; j++) {
          logits.grad![o + j] += g * (probs[o + j] - (j === targets[i] ? 1 : 0));
        }
      }
    });
  }
  return loss;
}

// plain row selection (for computing MLM logits only at masked positions)
export function selectRows(tape: Tape, x: Tensor, rows: Int32Array): Tensor {
  const d = x.cols;
  const needs = x.needsGrad();
  const c = out(rows.length, d, needs);
  for (let i = 0; i < rows.length; i++) {
    c.data.set(x.data.subarray(rows[i] * d, rows[i] * d + d), i * d);
  }
  if (needs) {
    tape.record(() => {
      const dc = c.grad!;
      for (let i = 0; i < rows.length; i++) {
        const dst = rows[i] * d;
        for (let j = 0; j < d; j++) x.grad![dst + j] += dc[i * d + j];
      }
    });
  }
  return c;
}

// logits against a tied embedding table: X[n,d] * E[v,d]^T
export function tiedLogits(tape: Tape, x: Tensor, table: Tensor): Tensor {
  const needs = x.needsGrad() || table.needsGrad();
  const c = out(x.rows, table.rows, needs);
  mmNT(x.data, table.data, c.data, x.rows, x.cols, table.rows);
  if (needs) {
    tape.record(() => {
      const dc = c.grad!;
      if (x.grad) mmNN(dc, table.data, x.grad, x.rows, table.rows, x.cols, true);
      if (table.grad) mmTN(dc, x.data, table.grad, x.rows, table.rows, x.cols, true);
    });
  }
  return c;
}

export class Adam {
  private m = new Map<Tensor, Float64Array>();
  private v = new Map<Tensor, Float64Array>();
  private t = 0;

  constructor(
    private params: Tensor[],
    private lr: number,
    private beta1 = 0.9,
    private beta2 = 0.999,
    private eps = 1e-8,
  ) {
    for (const p of params) {
      this.m.set(p, new Float64Array(p.data.length));
      this.v.set(p, new Float64Array(p.data.length));
    }
  }

  zeroGrad(): void {
    for (const p of this.params) p.zeroGrad();
  }

  step(): void {
    this.t += 1;
    const c1 = 1 - Math.pow(this.beta1, this.t);
    const c2 = 1 - Math.pow(this.beta2, this.t);
    for (const p of this.params) {
      const g = p.grad!;
      const m = this.m.get(p)!;
      const v = this.v.get(p)!;
      for (let i = 0; i < g.length; i++) {
        m[i] = this.beta1 * m[i] + (1 - this.beta1) * g[i];
        v[i] = this.beta2 * v[i] + (1 - this.beta2) * g[i] * g[i];
        p.data[i] -= (this.lr * (m[i] / c1)) / (Math.sqrt(v[i] / c2) + this.eps);
      }
    }
  }
}
