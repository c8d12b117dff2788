// CLI: `prepare <dir>` generates toy corpora and all transfer artifacts via
// the vocabtransfer toolkit; `compare <dir>` runs the init comparison and
// writes report.json; `all <dir>` does both.

import { join } from "node:path";
import { runComparison, writeReport } from "./compare.js";
import { loadPrepared, prepare } from "./prepare.js";

function parseSeeds(arg: string | undefined): number[] {
  if (!arg) return [1, 2, 3];
  return arg.split(",").map((s) => {
    const n = Number(s);
    if (!Number.isInteger(n)) throw new Error(`bad seed ${s}`);
    return n;
  });
}

function main(argv: string[]): number {
  const [command, workDir, seedArg] = argv;
  if (!command || !workDir) {
    console.error("usage: main.ts <prepare|compare|all> <workdir> [seeds]");
    return 2;
  }
  if (command === "prepare") {
    const prepared = prepare(workDir);
    console.log(
      `prepared artifacts under ${workDir} `
      + `(pretrain final MLM loss ${prepared.pretrainFinalLoss.toFixed(3)})`,
    );
    return 0;
  }
  if (command === "compare" || command === "all") {
    const prepared = command === "all" ? prepare(workDir) : loadPrepared(workDir);
    const seeds = parseSeeds(seedArg);
    const report = runComparison(prepared, seeds);
    const reportPath = join(workDir, "report.json");
    writeReport(report, reportPath);
    for (const run of report.runs) {
      const c = run.cells;
      console.log(
        `seed ${run.seed}: `
        + `random ${c.random.accuracy_classifier.toFixed(3)}/${c.random.accuracy_mlm_classifier.toFixed(3)}  `
        + `matched ${c.matched.accuracy_classifier.toFixed(3)}/${c.matched.accuracy_mlm_classifier.toFixed(3)}  `
        + `averaged ${c.averaged.accuracy_classifier.toFixed(3)}/${c.averaged.accuracy_mlm_classifier.toFixed(3)}`,
      );
    }
    console.log(
      `table-2 strict ordering on all seeds: ${report.orderings.table2_strict_all_seeds}`,
    );
    console.log(`report -> ${reportPath}`);
    return report.orderings.table2_strict_all_seeds ? 0 : 1;
  }
  console.error(`unknown command ${command}`);
  return 2;
}

process.exit(main(process.argv.slice(2)));
