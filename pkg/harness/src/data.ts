// Synthetic toy task. A generic corpus teaches the old model its stems; the
// downstream corpus adds class-specific compound words built from those same
// stems. Compounds never occur in the generic corpus, so their embeddings
// exist in the old space only through their parts: exactly the situation the
// averaged initialization exploits.

import { writeFileSync } from "node:fs";
import { join } from "node:path";
import { Rng } from "./rng.js";

const STEM_ONSETS = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"];
const STEM_VOWELS = ["a", "e", "i", "o", "u"];

export interface ToyData {
  genericLines: string[];
  downstreamLines: string[];
  labels: number[];
  classes: number;
}

function makeStems(rng: Rng, count: number): string[] {
  const stems = new Set<string>();
  while (stems.size < count) {
    const syllables = 2;
    let stem = "";
    for (let s = 0; s < syllables; s++) {
      stem += rng.pick(STEM_ONSETS) + rng.pick(STEM_VOWELS);
    }
    stems.add(stem);
  }
  return [...stems].sort();
}

export function generateToyData(seed: number): ToyData {
  const rng = new Rng(seed);
  const stems = makeStems(rng, 36);
  const functionWords = ["na", "se", "ti", "lo", "ve", "ku", "ri", "po"];
  const classes = 4;

  // class c owns six stem pairs; the pair (not the stems) carries the label
  const compounds: string[][] = [];
  const used = new Set<string>();
  for (let c = 0; c < classes; c++) {
    const own: string[] = [];
    while (own.length < 6) {
      const a = rng.pick(stems);
      const b = rng.pick(stems);
      const compound = a + b;
      if (a === b || used.has(compound)) continue;
      used.add(compound);
      own.push(compound);
    }
    compounds.push(own);
  }

  const genericLines: string[] = [];
  for (let i = 0; i < 1400; i++) {
    const words: string[] = [];
    const n = rng.range(8, 12);
    for (let w = 0; w < n; w++) {
      words.push(rng.next() < 0.35 ? rng.pick(functionWords) : rng.pick(stems));
    }
    genericLines.push(words.join(" "));
  }

  const downstreamLines: string[] = [];
  const labels: number[] = [];
  for (let i = 0; i < 900; i++) {
    const label = rng.int(classes);
    const words: string[] = [];
    const n = rng.range(8, 11);
    const compoundSlots = new Set<number>();
    const nCompounds = rng.next() < 0.5 ? 1 : 2;
    while (compoundSlots.size < nCompounds) compoundSlots.add(rng.int(n));
    for (let w = 0; w < n; w++) {
      if (compoundSlots.has(w)) {
        words.push(rng.pick(compounds[label]));
      } else {
        words.push(rng.next() < 0.35 ? rng.pick(functionWords) : rng.pick(stems));
      }
    }
    downstreamLines.push(words.join(" "));
    labels.push(label);
  }

  return { genericLines, downstreamLines, labels, classes };
}

export function writeToyData(dir: string, data: ToyData): {
  genericPath: string;
  downstreamPath: string;
  labelsPath: string;
} {
  const genericPath = join(dir, "generic.txt");
  const downstreamPath = join(dir, "downstream.txt");
  const labelsPath = join(dir, "labels.txt");
  writeFileSync(genericPath, data.genericLines.join("\n") + "\n");
  writeFileSync(downstreamPath, data.downstreamLines.join("\n") + "\n");
  writeFileSync(labelsPath, data.labels.join("\n") + "\n");
  return { genericPath, downstreamPath, labelsPath };
}
