// Artifact preparation: generate the toy corpora, drive the vocabtransfer CLI
// (old vocabulary, encodings, matched/averaged pipelines), pretrain the old
// model on the generic corpus, and export its embeddings + body weights.

import { existsSync, mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";
import {
  Matrix,
  readEncodedLines,
  readVocab,
  runCli,
  sha256File,
  writeMatrixText,
} from "./artifacts.js";
import { TOY } from "./config.js";
import { generateToyData, writeToyData } from "./data.js";
import { TinyBert } from "./model.js";
import { saveBody } from "./persist.js";
import { Rng } from "./rng.js";
import { makeWindows, trainMlm } from "./train.js";

export interface Prepared {
  workDir: string;
  genericPath: string;
  downstreamPath: string;
  labelsPath: string;
  oldVocabPath: string;
  oldMergesPath: string;
  oldEmbeddingsPath: string;
  bodyPath: string;
  averagedManifest: string;
  matchedManifest: string;
  downstreamEncodedPath: string;
  pretrainFinalLoss: number;
}

export function prepare(workDir: string): Prepared {
  mkdirSync(workDir, { recursive: true });
  const data = generateToyData(TOY.dataSeed);
  const { genericPath, downstreamPath, labelsPath } = writeToyData(workDir, data);

  const oldSideDir = join(workDir, "oldside");
  runCli(
    [
      "train-vocab",
      "--corpus", genericPath,
      "--size", String(TOY.oldVocabSize),
      "--out", oldSideDir,
    ],
    "old vocabulary training",
  );
  const oldVocabPath = join(oldSideDir, `vocab_${TOY.oldVocabSize}.txt`);
  const oldMergesPath = join(oldSideDir, `merges_${TOY.oldVocabSize}.txt`);

  const genericEncodedDir = join(workDir, "generic-encoded");
  runCli(
    [
      "encode",
      "--corpus", genericPath,
      "--vocab", oldVocabPath,
      "--merges", oldMergesPath,
      "--out", genericEncodedDir,
    ],
    "generic corpus encoding",
  );

  const oldVocab = readVocab(oldVocabPath);
  const cfg = {
    vocabSize: oldVocab.surfaces.length,
    dim: TOY.dim,
    heads: TOY.heads,
    layers: TOY.layers,
    seqLen: TOY.seqLen,
    classes: TOY.classes,
  };
  const model = new TinyBert(cfg, new Rng(TOY.pretrainSeed));
  const windows = makeWindows(
    readEncodedLines(join(genericEncodedDir, "encoded.txt")), TOY.seqLen,
  );
  const pretrainFinalLoss = trainMlm(
    model, windows, TOY.pretrainSteps, TOY.batch, TOY.mlmLr,
    oldVocab.maskId, oldVocab.padId, new Rng(TOY.pretrainSeed + 1),
  );

  const oldEmbeddingsPath = join(workDir, "old_embeddings.txt");
  const emb: Matrix = {
    rows: model.tokenEmb.rows,
    cols: model.tokenEmb.cols,
    data: model.tokenEmb.data,
  };
  writeMatrixText(oldEmbeddingsPath, emb);
  const bodyPath = join(workDir, "old_body.json");
  saveBody(model, bodyPath);

  const pipelines: Record<string, string> = {};
  for (const mode of ["averaged", "matched"]) {
    const outDir = join(workDir, `artifacts-${mode}`);
    runCli(
      [
        "pipeline",
        "--corpus", downstreamPath,
        "--old-vocab", oldVocabPath,
        "--old-merges", oldMergesPath,
        "--old-matrix", oldEmbeddingsPath,
        "--size", String(TOY.newVocabSize),
        "--mode", mode,
        "--out", outDir,
      ],
      `${mode} transfer pipeline`,
    );
    pipelines[mode] = join(outDir, "manifest.json");
  }

  const newVocabPath = join(workDir, "artifacts-averaged", `vocab_${TOY.newVocabSize}.txt`);
  const newMergesPath = join(workDir, "artifacts-averaged", `merges_${TOY.newVocabSize}.txt`);
  const matchedVocabPath = join(workDir, "artifacts-matched", `vocab_${TOY.newVocabSize}.txt`);
  if (sha256File(newVocabPath) !== sha256File(matchedVocabPath)) {
    throw new Error("matched and averaged pipelines trained different vocabularies");
  }

  const downstreamEncodedDir = join(workDir, "downstream-encoded");
  runCli(
    [
      "encode",
      "--corpus", downstreamPath,
      "--vocab", newVocabPath,
      "--merges", newMergesPath,
      "--out", downstreamEncodedDir,
    ],
    "downstream corpus encoding",
  );

  const prepared: Prepared = {
    workDir,
    genericPath,
    downstreamPath,
    labelsPath,
    oldVocabPath,
    oldMergesPath,
    oldEmbeddingsPath,
    bodyPath,
    averagedManifest: pipelines["averaged"],
    matchedManifest: pipelines["matched"],
    downstreamEncodedPath: join(downstreamEncodedDir, "encoded.txt"),
    pretrainFinalLoss,
  };
  writeFileSync(join(workDir, "prepared.json"), JSON.stringify(prepared, null, 2) + "\n");
  return prepared;
}

export function loadPrepared(workDir: string): Prepared {
  const path = join(workDir, "prepared.json");
  if (!existsSync(path)) {
    throw new Error(`no prepared.json under ${workDir}; run prepare first`);
  }
  return JSON.parse(readFileSync(path, "utf-8"));
}
