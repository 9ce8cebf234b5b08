/** Map a loaded source checkpoint onto the portable layer stack.
 *
 * All layout conventions are resolved here: conv kernels go from the
 * source's [kh, kw, in, out] to [out][in][ky][kx], image shapes from
 * channels-last to channel-first, and the first dense layer after a
 * flatten gets its weight rows permuted so that the portable row-major
 * channel-first flatten feeds the same weight to the same pixel.
 */

import { getWeight, SourceModel } from "./tfjs";
import { resolvePadding } from "./padding";
import { ExportError, ExportManifest, PortableLayer, PortableModel } from "./types";

const SUPPORTED: Record<string, string> = {
  Dense: "Dense",
  Conv2D: "Conv2D",
  MaxPooling2D: "MaxPool2D",
  Flatten: "Flatten",
  ReLU: "ReLU",
  Activation: "ReLU", // only the relu activation is accepted
};

function flattenPermutation(h: number, w: number, c: number): Int32Array {
  // perm[portableIndex] = sourceIndex
  const perm = new Int32Array(c * h * w);
  for (let cc = 0; cc < c; cc++) {
    for (let y = 0; y < h; y++) {
      for (let x = 0; x < w; x++) {
        perm[(cc * h + y) * w + x] = (y * w + x) * c + cc;
      }
    }
  }
  return perm;
}

/** Reorder a flat channels-last input into the portable channel-first order. */
export function toChannelFirst(input: number[], sourceShape: number[]): Float64Array {
  if (sourceShape.length !== 3) {
    return Float64Array.from(input);
  }
  const [h, w, c] = sourceShape;
  const perm = flattenPermutation(h, w, c);
  const out = new Float64Array(input.length);
  for (let j = 0; j < out.length; j++) out[j] = input[perm[j]];
  return out;
}

export function convertModel(src: SourceModel, manifest: ExportManifest): PortableModel {
  if (src.layers.length === 0) {
    throw new ExportError("source model has no layers");
  }

  const offenders: string[] = [];
  for (const layer of src.layers) {
    const target = SUPPORTED[layer.className];
    if (target === undefined) {
      offenders.push(`${layer.name} (${layer.className})`);
      continue;
    }
    const mapped = manifest.layerMap[layer.name];
    if (mapped === undefined) {
      offenders.push(`${layer.name} (no manifest mapping)`);
    } else if (mapped !== target) {
      offenders.push(`${layer.name} (mapped to ${mapped}, expected ${target})`);
    }
    if (layer.className === "Activation" && layer.config.activation !== "relu") {
      offenders.push(`${layer.name} (activation ${String(layer.config.activation)})`);
    }
  }
  if (offenders.length > 0) {
    throw new ExportError(`unsupported source layers: ${offenders.join(", ")}`);
  }

  let shape = src.inputShape.slice(); // channels-last bookkeeping
  // permutation pending for the next dense layer after a spatial flatten
  let pendingPermutation: Int32Array | null = null;
  const layers: PortableLayer[] = [];

  for (const layer of src.layers) {
    const cfg = layer.config as Record<string, any>;
    const activation = String(cfg.activation ?? "linear");
    switch (layer.className) {
      case "Dense": {
        if (shape.length !== 1) {
          throw new ExportError(
            `layer ${layer.name}: dense layers need a flat input, got shape [${shape}]`
          );
        }
        const kernel = getWeight(src, layer.name, "kernel");
        const bias = getWeight(src, layer.name, "bias");
        const [nin, nout] = kernel.shape;
        if (nin !== shape[0]) {
          throw new ExportError(
            `layer ${layer.name}: kernel expects ${nin} inputs, upstream provides ${shape[0]}`
          );
        }
        let weights: number[];
        if (pendingPermutation !== null) {
          weights = new Array(nin * nout);
          for (let j = 0; j < nin; j++) {
            const sj = pendingPermutation[j];
            for (let k = 0; k < nout; k++) {
              weights[j * nout + k] = kernel.data[sj * nout + k];
            }
          }
          pendingPermutation = null;
        } else {
          weights = Array.from(kernel.data);
        }
        layers.push({
          kind: "Dense",
          inputs: nin,
          outputs: nout,
          weights,
          bias: Array.from(bias.data),
        });
        if (activation === "relu") {
          layers.push({ kind: "ReLU" });
        } else if (activation !== "linear") {
          throw new ExportError(`layer ${layer.name}: activation ${activation} is unsupported`);
        }
        shape = [nout];
        break;
      }
      case "Conv2D": {
        if (shape.length !== 3) {
          throw new ExportError(`layer ${layer.name}: convolution needs an image input`);
        }
        const kernel = getWeight(src, layer.name, "kernel");
        const bias = getWeight(src, layer.name, "bias");
        const [kh, kw, ci, co] = kernel.shape;
        const [h, w, c] = shape;
        if (ci !== c) {
          throw new ExportError(`layer ${layer.name}: channel mismatch (${ci} vs ${c})`);
        }
        const [sh, sw] = (cfg.strides as number[]) ?? [1, 1];
        const [py, px] = resolvePadding(String(cfg.padding ?? "valid"), kh, kw, sh, sw, layer.name);
        const out = new Array(co * ci * kh * kw);
        for (let k = 0; k < co; k++) {
          for (let cc = 0; cc < ci; cc++) {
            for (let ky = 0; ky < kh; ky++) {
              for (let kx = 0; kx < kw; kx++) {
                out[((k * ci + cc) * kh + ky) * kw + kx] =
                  kernel.data[((ky * kw + kx) * ci + cc) * co + k];
              }
            }
          }
        }
        layers.push({
          kind: "Conv2D",
          outChannels: co,
          inChannels: ci,
          kernelHeight: kh,
          kernelWidth: kw,
          strideY: sh,
          strideX: sw,
          padY: py,
          padX: px,
          kernel: out,
          bias: Array.from(bias.data),
        });
        if (activation === "relu") {
          layers.push({ kind: "ReLU" });
        } else if (activation !== "linear") {
          throw new ExportError(`layer ${layer.name}: activation ${activation} is unsupported`);
        }
        shape = [
          Math.floor((h + 2 * py - kh) / sh) + 1,
          Math.floor((w + 2 * px - kw) / sw) + 1,
          co,
        ];
        break;
      }
      case "MaxPooling2D": {
        const [wh, ww] = (cfg.pool_size as number[]) ?? [2, 2];
        const [sh, sw] = (cfg.strides as number[]) ?? [wh, ww];
        if (String(cfg.padding ?? "valid") !== "valid") {
          throw new ExportError(`layer ${layer.name}: only valid pooling padding is supported`);
        }
        const [h, w, c] = shape;
        layers.push({ kind: "MaxPool2D", windowY: wh, windowX: ww, strideY: sh, strideX: sw });
        shape = [Math.floor((h - wh) / sh) + 1, Math.floor((w - ww) / sw) + 1, c];
        break;
      }
      case "Flatten": {
        if (shape.length === 3) {
          const [h, w, c] = shape;
          pendingPermutation = flattenPermutation(h, w, c);
          shape = [h * w * c];
        }
        layers.push({ kind: "Flatten" });
        break;
      }
      case "ReLU":
      case "Activation": {
        layers.push({ kind: "ReLU" });
        break;
      }
    }
  }

  const last = layers[layers.length - 1];
  if (last.kind !== "Dense") {
    throw new ExportError(
      "the exported stack must end in a dense layer producing pre-softmax scores; " +
        "remove the final activation from the source model"
    );
  }
  const inputShape =
    src.inputShape.length === 3
      ? [src.inputShape[2], src.inputShape[0], src.inputShape[1]]
      : src.inputShape.slice();
  return {
    formatVersion: 1,
    inputShape,
    numClasses: last.outputs,
    layers,
  };
}
