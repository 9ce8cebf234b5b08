import { ExportError } from "./types";

/** Resolve a source padding mode to the symmetric zero padding the portable
 * format can express. "same" is representable only for stride 1 with odd
 * kernels (where it pads (k-1)/2 on both sides); other cases are rejected.
 */
export function resolvePadding(
  mode: string,
  kh: number,
  kw: number,
  sh: number,
  sw: number,
  layerName: string
): [number, number] {
  if (mode === "valid") {
    return [0, 0];
  }
  if (mode === "same") {
    if (sh === 1 && sw === 1 && kh % 2 === 1 && kw % 2 === 1) {
      return [(kh - 1) / 2, (kw - 1) / 2];
    }
    throw new ExportError(
      `layer ${layerName}: 'same' padding is asymmetric for stride ${sh}x${sw} ` +
        `kernel ${kh}x${kw} and cannot be expressed as symmetric zero padding`
    );
  }
  throw new ExportError(`layer ${layerName}: unknown padding mode ${mode}`);
}
