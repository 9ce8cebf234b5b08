/** Export entry point: load, convert, verify, then write atomically. */

import * as fs from "fs";
import * as path from "path";

import { convertModel, toChannelFirst } from "./convert";
import { evalPortable } from "./evalPortable";
import { evalSource } from "./evalSource";
import { mulberry32 } from "./prng";
import { loadTfjsModel } from "./tfjs";
import { ExportError, ExportManifest, PortableModel } from "./types";

export const VERIFICATION_TOLERANCE = 1e-4;

export interface ExportResult {
  outPath: string;
  verifiedInputs: number;
  maxDeviation: number;
}

export function loadManifest(manifestPath: string): ExportManifest {
  let doc: unknown;
  try {
    doc = JSON.parse(fs.readFileSync(manifestPath, "utf-8"));
  } catch (e) {
    throw new ExportError(`${manifestPath}: invalid JSON (${(e as Error).message})`);
  }
  const manifest = doc as ExportManifest;
  if (manifest.sourceFormat !== "tfjs-layers") {
    throw new ExportError(
      `unsupported source format ${String(manifest.sourceFormat)}; expected tfjs-layers`
    );
  }
  if (typeof manifest.layerMap !== "object" || manifest.layerMap === null) {
    throw new ExportError("manifest: layerMap must be an object");
  }
  return manifest;
}

function verificationInputs(manifest: ExportManifest, inputSize: number): number[][] {
  if (manifest.verificationInputs && manifest.verificationInputs.length > 0) {
    for (const [i, input] of manifest.verificationInputs.entries()) {
      if (input.length !== inputSize) {
        throw new ExportError(
          `manifest verification input ${i} has ${input.length} entries, expected ${inputSize}`
        );
      }
    }
    return manifest.verificationInputs;
  }
  const rand = mulberry32(0x5eed);
  return Array.from({ length: 10 }, () =>
    Array.from({ length: inputSize }, () => rand())
  );
}

export function exportModel(
  srcDir: string,
  manifestPath: string,
  outPath: string
): ExportResult {
  const manifest = loadManifest(manifestPath);
  const source = loadTfjsModel(srcDir);
  const portable = convertModel(source, manifest);

  const inputSize = source.inputShape.reduce((a, b) => a * b, 1);
  const inputs = verificationInputs(manifest, inputSize);
  let maxDeviation = 0;
  for (const [i, input] of inputs.entries()) {
    const fromSource = evalSource(source, Float64Array.from(input));
    const fromPortable = evalPortable(portable, toChannelFirst(input, source.inputShape));
    if (fromSource.length !== fromPortable.length) {
      throw new ExportError(
        `verification input ${i}: output sizes differ (${fromSource.length} vs ${fromPortable.length})`
      );
    }
    for (let k = 0; k < fromSource.length; k++) {
      maxDeviation = Math.max(maxDeviation, Math.abs(fromSource[k] - fromPortable[k]));
    }
  }
  if (maxDeviation > VERIFICATION_TOLERANCE) {
    throw new ExportError(
      `verification failed: outputs deviate by ${maxDeviation} (> ${VERIFICATION_TOLERANCE}); no file written`
    );
  }

  writePortable(portable, outPath);
  return { outPath, verifiedInputs: inputs.length, maxDeviation };
}

/** Serialize through a temporary file so a failed export leaves nothing behind. */
export function writePortable(model: PortableModel, outPath: string): void {
  const dir = path.dirname(path.resolve(outPath));
  fs.mkdirSync(dir, { recursive: true });
  const tmp = path.join(dir, `.${path.basename(outPath)}.tmp`);
  fs.writeFileSync(tmp, JSON.stringify(model) + "\n");
  fs.renameSync(tmp, outPath);
}
