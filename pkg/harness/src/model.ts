// Tiny bidirectional transformer with a tied-embedding MLM head and a
// mean-pooled linear classifier head. Body weights (everything except the
// token embedding table) are carried across vocabulary swaps.

import { Rng } from "./rng.js";
import {
  Adam,
  Tape,
  Tensor,
  add,
  addBias,
  attention,
  crossEntropy,
  gatherRows,
  gelu,
  layerNorm,
  matmul,
  meanPool,
  selectRows,
  tiedLogits,
} from "./tensor.js";

export interface ModelConfig {
  vocabSize: number;
  dim: number;
  heads: number;
  layers: number;
  seqLen: number;
  classes: number;
}

interface Block {
  ln1g: Tensor;
  ln1b: Tensor;
  wq: Tensor;
  wk: Tensor;
  wv: Tensor;
  wo: Tensor;
  ln2g: Tensor;
  ln2b: Tensor;
  w1: Tensor;
  b1: Tensor;
  w2: Tensor;
  b2: Tensor;
}

export class TinyBert {
  cfg: ModelConfig;
  tokenEmb: Tensor;
  posEmb: Tensor;
  blocks: Block[] = [];
  lnFg: Tensor;
  lnFb: Tensor;
  clsW: Tensor;
  clsB: Tensor;

  constructor(cfg: ModelConfig, rng: Rng) {
    this.cfg = cfg;
    this.tokenEmb = Tensor.param(cfg.vocabSize, cfg.dim, rng);
    this.posEmb = Tensor.param(cfg.seqLen, cfg.dim, rng);
    for (let l = 0; l < cfg.layers; l++) {
      this.blocks.push({
        ln1g: Tensor.filled(1, cfg.dim, 1, true),
        ln1b: Tensor.filled(1, cfg.dim, 0, true),
        wq: Tensor.param(cfg.dim, cfg.dim, rng),
        wk: Tensor.param(cfg.dim, cfg.dim, rng),
        wv: Tensor.param(cfg.dim, cfg.dim, rng),
        wo: Tensor.param(cfg.dim, cfg.dim, rng),
        ln2g: Tensor.filled(1, cfg.dim, 1, true),
        ln2b: Tensor.filled(1, cfg.dim, 0, true),
        w1: Tensor.param(cfg.dim, 4 * cfg.dim, rng),
        b1: Tensor.filled(1, 4 * cfg.dim, 0, true),
        w2: Tensor.param(4 * cfg.dim, cfg.dim, rng),
        b2: Tensor.filled(1, cfg.dim, 0, true),
      });
    }
    this.lnFg = Tensor.filled(1, cfg.dim, 1, true);
    this.lnFb = Tensor.filled(1, cfg.dim, 0, true);
    this.clsW = Tensor.param(cfg.dim, cfg.classes, rng);
    this.clsB = Tensor.filled(1, cfg.classes, 0, true);
  }

  bodyParams(): Tensor[] {
    const params: Tensor[] = [this.posEmb, this.lnFg, this.lnFb];
    for (const b of this.blocks) {
      params.push(
        b.ln1g, b.ln1b, b.wq, b.wk, b.wv, b.wo,
        b.ln2g, b.ln2b, b.w1, b.b1, b.w2, b.b2,
      );
    }
    return params;
  }

  mlmParams(): Tensor[] {
    return [this.tokenEmb, ...this.bodyParams()];
  }

  classifierParams(): Tensor[] {
    return [this.tokenEmb, ...this.bodyParams(), this.clsW, this.clsB];
  }

  // ids is a flattened [batch*seqLen] window
  encode(tape: Tape, ids: Int32Array, batch: number): Tensor {
    const { seqLen, heads } = this.cfg;
    let h = gatherRows(tape, this.tokenEmb, ids);
    const posIds = new Int32Array(ids.length);
    for (let i = 0; i < ids.length; i++) posIds[i] = i % seqLen;
    h = add(tape, h, gatherRows(tape, this.posEmb, posIds));
    for (const blk of this.blocks) {
      const n1 = layerNorm(tape, h, blk.ln1g, blk.ln1b);
      const q = matmul(tape, n1, blk.wq);
      const k = matmul(tape, n1, blk.wk);
      const v = matmul(tape, n1, blk.wv);
      const att = attention(tape, q, k, v, batch, seqLen, heads);
      h = add(tape, h, matmul(tape, att, blk.wo));
      const n2 = layerNorm(tape, h, blk.ln2g, blk.ln2b);
      const mid = gelu(tape, addBias(tape, matmul(tape, n2, blk.w1), blk.b1));
      h = add(tape, h, addBias(tape, matmul(tape, mid, blk.w2), blk.b2));
    }
    return layerNorm(tape, h, this.lnFg, this.lnFb);
  }

  mlmLoss(
    tape: Tape, ids: Int32Array, batch: number,
    maskedPositions: Int32Array, targets: Int32Array,
  ): Tensor {
    const h = this.encode(tape, ids, batch);
    const masked = selectRows(tape, h, maskedPositions);
    const logits = tiedLogits(tape, masked, this.tokenEmb);
    return crossEntropy(tape, logits, targets);
  }

  classifierLogits(
    tape: Tape, ids: Int32Array, batch: number, lens: Int32Array,
  ): Tensor {
    const h = this.encode(tape, ids, batch);
    const pooled = meanPool(tape, h, batch, this.cfg.seqLen, lens);
    return addBias(tape, matmul(tape, pooled, this.clsW), this.clsB);
  }
}

export function argmaxRows(logits: Tensor): Int32Array {
  const preds = new Int32Array(logits.rows);
  for (let i = 0; i < logits.rows; i++) {
    const o = i * logits.cols;
    let best = 0;
    for (let j = 1; j < logits.cols; j++) {
      if (logits.data[o + j] > logits.data[o + best]) best = j;
    }
    preds[i] = best;
  }
  return preds;
}

export { Adam, Tape, Tensor };
