#!/usr/bin/env node
/** CLI: plrp-export --src <checkpoint dir> --manifest <json> --out <model.json> */

import { exportModel } from "./export";
import { ExportError } from "./types";

function parseArgs(argv: string[]): { src: string; manifest: string; out: string } {
  const values: Record<string, string> = {};
  for (let i = 0; i < argv.length; i += 2) {
    const flag = argv[i];
    const value = argv[i + 1];
    if (!flag.startsWith("--") || value === undefined) {
      throw new UsageError(`unexpected argument ${flag}`);
    }
    values[flag.slice(2)] = value;
  }
  for (const required of ["src", "manifest", "out"]) {
    if (!(required in values)) {
      throw new UsageError(`missing required flag --${required}`);
    }
  }
  return { src: values.src, manifest: values.manifest, out: values.out };
}

class UsageError extends Error {}

export function main(argv: string[]): number {
  let args;
  try {
    args = parseArgs(argv);
  } catch (e) {
    console.error(`usage: plrp-export --src DIR --manifest FILE --out FILE`);
    console.error(`error: ${(e as Error).message}`);
    return 1;
  }
  try {
    const result = exportModel(args.src, args.manifest, args.out);
    console.log(
      `exported ${args.src} -> ${result.outPath} ` +
        `(verified on ${result.verifiedInputs} inputs, max deviation ${result.maxDeviation})`
    );
    return 0;
  } catch (e) {
    if (e instanceof ExportError) {
      console.error(`error: ${e.message}`);
      return 2;
    }
    throw e;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
