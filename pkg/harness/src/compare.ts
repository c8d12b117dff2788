// The comparison itself: random vs matched vs averaged initialization of the
// new-vocabulary embeddings, each with and without an intermediary MLM
// adaptation step, all on top of the same pretrained body. The "standard"
// (baseline) cell of the accuracy table corresponds to the random
// initialization: the new tokenization with no knowledge transferred.

import { writeFileSync } from "node:fs";
import {
  manifestArtifact,
  readEncodedLines,
  readLabels,
  readManifest,
  readMatrixText,
  readVocab,
  verifyManifest,
} from "./artifacts.js";
import { TOY } from "./config.js";
import { TinyBert } from "./model.js";
import { loadBodyInto, restore, snapshot } from "./persist.js";
import { Prepared } from "./prepare.js";
import { Rng } from "./rng.js";
import {
  Example,
  evalAccuracy,
  makeExamples,
  makeMlmBatch,
  makeWindows,
  mlmLossOn,
  trainClassifier,
  trainMlm,
} from "./train.js";

export const INITS = ["random", "matched", "averaged"] as const;
export type InitKind = (typeof INITS)[number];

export interface CellResult {
  initial_mlm_loss: number;
  mlm_loss_after_adaptation: number;
  accuracy_classifier: number;
  accuracy_mlm_classifier: number;
}

export interface SeedRun {
  seed: number;
  cells: Record<InitKind, CellResult>;
}

export interface Report {
  toy_config: Record<string, unknown>;
  mapping_note: string;
  chance_level: number;
  seeds: number[];
  runs: SeedRun[];
  orderings: {
    per_seed: Array<Record<string, boolean>>;
    table2_strict_all_seeds: boolean;
  };
}

export function runComparison(prepared: Prepared, seeds: number[]): Report {
  const averaged = readManifest(prepared.averagedManifest);
  const matched = readManifest(prepared.matchedManifest);
  verifyManifest(averaged); // aborts on digest mismatch
  verifyManifest(matched);

  const size = TOY.newVocabSize;
  const newVocab = readVocab(manifestArtifact(averaged, "vocab", size));
  const averagedEmb = readMatrixText(manifestArtifact(averaged, "matrix_text", size));
  const matchedEmb = readMatrixText(manifestArtifact(matched, "matrix_text", size));
  const lines = readEncodedLines(prepared.downstreamEncodedPath);
  const labels = readLabels(prepared.labelsPath);
  if (lines.length !== labels.length) {
    throw new Error("downstream corpus and labels are not line-aligned");
  }

  const cfg = {
    vocabSize: newVocab.surfaces.length,
    dim: TOY.dim,
    heads: TOY.heads,
    layers: TOY.layers,
    seqLen: TOY.seqLen,
    classes: TOY.classes,
  };
  if (averagedEmb.rows !== cfg.vocabSize || matchedEmb.rows !== cfg.vocabSize) {
    throw new Error("transferred matrix rows disagree with the new vocabulary");
  }

  // fixed split, independent of the run seed, so every cell sees the same data
  const order = lines.map((_, i) => i);
  new Rng(TOY.splitSeed).shuffle(order);
  const nTrain = Math.floor(order.length * TOY.trainFraction);
  const all = makeExamples(lines, labels, TOY.seqLen, newVocab.padId);
  const trainSet: Example[] = order.slice(0, nTrain).map((i) => all[i]);
  const testSet: Example[] = order.slice(nTrain).map((i) => all[i]);
  const trainLines = order.slice(0, nTrain).map((i) => lines[i]);
  const mlmWindows = makeWindows(trainLines, TOY.seqLen);

  const runs: SeedRun[] = [];
  for (const seed of seeds) {
    const model = new TinyBert(cfg, new Rng(1000 + seed));
    loadBodyInto(model, prepared.bodyPath);
    const randomEmb = model.tokenEmb.data.slice(); // seeded N(0, randomInitStd)
    for (let i = 0; i < randomEmb.length; i++) {
      randomEmb[i] = (randomEmb[i] / 0.02) * TOY.randomInitStd;
    }
    const base = snapshot(model);
    const probe = makeMlmBatch(
      mlmWindows, TOY.batch, TOY.seqLen, cfg.vocabSize,
      newVocab.maskId, newVocab.padId, new Rng(7000 + seed),
    );

    const cells = {} as Record<InitKind, CellResult>;
    for (const init of INITS) {
      restore(model, base);
      if (init === "random") model.tokenEmb.data.set(randomEmb);
      else if (init === "matched") model.tokenEmb.data.set(matchedEmb.data);
      else model.tokenEmb.data.set(averagedEmb.data);
      const initState = snapshot(model);

      // without the intermediary MLM step
      trainClassifier(
        model, trainSet, TOY.classifierSteps, TOY.batch, TOY.classifierLr,
        new Rng(2000 + seed),
      );
      const accPlain = evalAccuracy(model, testSet);

      // with the intermediary MLM step
      restore(model, initState);
      const lossBefore = mlmLossOn(model, probe);
      trainMlm(
        model, mlmWindows, TOY.mlmSteps, TOY.batch, TOY.mlmLr,
        newVocab.maskId, newVocab.padId, new Rng(3000 + seed),
      );
      const lossAfter = mlmLossOn(model, probe);
      trainClassifier(
        model, trainSet, TOY.classifierSteps, TOY.batch, TOY.classifierLr,
        new Rng(2000 + seed),
      );
      const accMlm = evalAccuracy(model, testSet);

      cells[init] = {
        initial_mlm_loss: lossBefore,
        mlm_loss_after_adaptation: lossAfter,
        accuracy_classifier: accPlain,
        accuracy_mlm_classifier: accMlm,
      };
    }
    runs.push({ seed, cells });
  }

  const perSeed = runs.map(({ cells }) => ({
    standard_below_standard_mlm:
      cells.random.accuracy_classifier < cells.random.accuracy_mlm_classifier,
    standard_mlm_below_averaged:
      cells.random.accuracy_mlm_classifier < cells.averaged.accuracy_classifier,
    averaged_below_averaged_mlm:
      cells.averaged.accuracy_classifier < cells.averaged.accuracy_mlm_classifier,
    averaged_initial_mlm_loss_below_random:
      cells.averaged.initial_mlm_loss < cells.random.initial_mlm_loss,
  }));
  const strict = perSeed.every(
    (o) =>
      o.standard_below_standard_mlm &&
      o.standard_mlm_below_averaged &&
      o.averaged_below_averaged_mlm,
  );

  return {
    toy_config: { ...TOY },
    mapping_note:
      "the 'standard' (baseline) cell is the random initialization of the "
      + "new vocabulary's embeddings over the same pretrained body",
    chance_level: 1 / TOY.classes,
    seeds,
    runs,
    orderings: { per_seed: perSeed, table2_strict_all_seeds: strict },
  };
}

export function writeReport(report: Report, path: string): void {
  writeFileSync(path, JSON.stringify(report, null, 2) + "\n");
}
