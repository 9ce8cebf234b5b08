/** Reference forward pass in the source's channels-last layout.
 *
 * Independent of the portable-side evaluator so that agreement between the
 * two validates every weight transposition the converter performs.
 */

import { getWeight, SourceModel } from "./tfjs";
import { ExportError } from "./types";
import { resolvePadding } from "./padding";

function relu(x: Float64Array): Float64Array {
  return x.map((v) => (v > 0 ? v : 0));
}

function applyActivation(name: string, x: Float64Array): Float64Array {
  if (name === "linear" || name === undefined) return x;
  if (name === "relu") return relu(x);
  throw new ExportError(`activation ${name} is not evaluable here`);
}

export function evalSource(model: SourceModel, input: Float64Array): Float64Array {
  let shape = model.inputShape.slice();
  let x: Float64Array = Float64Array.from(input);
  for (const layer of model.layers) {
    const cfg = layer.config as Record<string, any>;
    switch (layer.className) {
      case "Dense": {
        const kernel = getWeight(model, layer.name, "kernel");
        const bias = getWeight(model, layer.name, "bias");
        const [nin, nout] = kernel.shape;
        if (x.length !== nin) {
          throw new ExportError(`layer ${layer.name}: expected ${nin} inputs, got ${x.length}`);
        }
        const y = new Float64Array(nout);
        for (let k = 0; k < nout; k++) {
          let acc = bias.data[k];
          for (let j = 0; j < nin; j++) acc += x[j] * kernel.data[j * nout + k];
          y[k] = acc;
        }
        x = applyActivation(String(cfg.activation ?? "linear"), y);
        shape = [nout];
        break;
      }
      case "Conv2D": {
        const kernel = getWeight(model, layer.name, "kernel");
        const bias = getWeight(model, layer.name, "bias");
        const [kh, kw, ci, co] = kernel.shape;
        const [h, w, c] = shape;
        if (c !== ci) {
          throw new ExportError(`layer ${layer.name}: channel mismatch (${c} vs ${ci})`);
        }
        const [sh, sw] = (cfg.strides as number[]) ?? [1, 1];
        const [py, px] = resolvePadding(String(cfg.padding ?? "valid"), kh, kw, sh, sw, layer.name);
        const oh = Math.floor((h + 2 * py - kh) / sh) + 1;
        const ow = Math.floor((w + 2 * px - kw) / sw) + 1;
        const y = new Float64Array(oh * ow * co);
        for (let oy = 0; oy < oh; oy++) {
          for (let ox = 0; ox < ow; ox++) {
            for (let k = 0; k < co; k++) {
              let acc = bias.data[k];
              for (let ky = 0; ky < kh; ky++) {
                const iy = oy * sh - py + ky;
                if (iy < 0 || iy >= h) continue;
                for (let kx = 0; kx < kw; kx++) {
                  const ix = ox * sw - px + kx;
                  if (ix < 0 || ix >= w) continue;
                  for (let cc = 0; cc < ci; cc++) {
                    acc +=
                      x[(iy * w + ix) * c + cc] *
                      kernel.data[((ky * kw + kx) * ci + cc) * co + k];
                  }
                }
              }
              y[(oy * ow + ox) * co + k] = acc;
            }
          }
        }
        x = applyActivation(String(cfg.activation ?? "linear"), y);
        shape = [oh, ow, co];
        break;
      }
      case "MaxPooling2D": {
        const [wh, ww] = (cfg.pool_size as number[]) ?? [2, 2];
        const [sh, sw] = (cfg.strides as number[]) ?? [wh, ww];
        const [h, w, c] = shape;
        const oh = Math.floor((h - wh) / sh) + 1;
        const ow = Math.floor((w - ww) / sw) + 1;
        const y = new Float64Array(oh * ow * c);
        for (let oy = 0; oy < oh; oy++) {
          for (let ox = 0; ox < ow; ox++) {
            for (let cc = 0; cc < c; cc++) {
              let best = -Infinity;
              for (let ky = 0; ky < wh; ky++) {
                for (let kx = 0; kx < ww; kx++) {
                  const v = x[((oy * sh + ky) * w + (ox * sw + kx)) * c + cc];
                  if (v > best) best = v;
                }
              }
              y[(oy * ow + ox) * c + cc] = best;
            }
          }
        }
        x = y;
        shape = [oh, ow, c];
        break;
      }
      case "Flatten": {
        shape = [x.length];
        break;
      }
      case "ReLU": {
        x = relu(x);
        break;
      }
      case "Activation": {
        x = applyActivation(String(cfg.activation), x);
        break;
      }
      default:
        throw new ExportError(`layer ${layer.name}: kind ${layer.className} is not evaluable`);
    }
  }
  return x;
}
