// Declared toy-scale defaults. Reported verbatim in every comparison report
// so runs are interpretable and reproducible.

export const TOY = {
  dim: 64,
  layers: 2,
  heads: 2,
  seqLen: 14,
  classes: 4,
  oldVocabSize: 280,
  newVocabSize: 400,
  pretrainSteps: 400,
  mlmSteps: 120,
  classifierSteps: 200,
  batch: 16,
  mlmLr: 1e-3,
  classifierLr: 1e-3,
  randomInitStd: 0.02,
  tiedDecoder: true,
  trainFraction: 0.7,
  dataSeed: 11,
  pretrainSeed: 101,
  splitSeed: 424242,
} as const;
