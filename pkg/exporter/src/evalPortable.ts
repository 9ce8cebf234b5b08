/** Forward pass over a portable model document (channel-first layout).
 *
 * Mirrors the semantics in the engine's docs/formats.md; used to verify an
 * export against the source evaluator before the file is accepted.
 */

import { ExportError, PortableModel } from "./types";

export function evalPortable(model: PortableModel, input: Float64Array): Float64Array {
  let shape = model.inputShape.slice();
  const size = shape.reduce((a, b) => a * b, 1);
  if (input.length !== size) {
    throw new ExportError(`input has ${input.length} entries, expected ${size}`);
  }
  let x: Float64Array = Float64Array.from(input);
  for (const layer of model.layers) {
    switch (layer.kind) {
      case "Dense": {
        const { inputs, outputs, weights, bias } = layer;
        if (x.length !== inputs) {
          throw new ExportError(`Dense expected ${inputs} inputs, got ${x.length}`);
        }
        const y = new Float64Array(outputs);
        for (let k = 0; k < outputs; k++) {
          let acc = bias[k];
          for (let j = 0; j < inputs; j++) acc += x[j] * weights[j * outputs + k];
          y[k] = acc;
        }
        x = y;
        shape = [outputs];
        break;
      }
      case "Conv2D": {
        const { outChannels: co, inChannels: ci, kernelHeight: kh, kernelWidth: kw } = layer;
        const { strideY: sh, strideX: sw, padY: py, padX: px, kernel, bias } = layer;
        const [c, h, w] = shape;
        if (c !== ci) {
          throw new ExportError(`Conv2D channel mismatch (${c} vs ${ci})`);
        }
        const oh = Math.floor((h + 2 * py - kh) / sh) + 1;
        const ow = Math.floor((w + 2 * px - kw) / sw) + 1;
        const y = new Float64Array(co * oh * ow);
        for (let k = 0; k < co; k++) {
          for (let oy = 0; oy < oh; oy++) {
            for (let ox = 0; ox < ow; ox++) {
              let acc = bias[k];
              for (let cc = 0; cc < ci; cc++) {
                for (let ky = 0; ky < kh; ky++) {
                  const iy = oy * sh - py + ky;
                  if (iy < 0 || iy >= h) continue;
                  for (let kx = 0; kx < kw; kx++) {
                    const ix = ox * sw - px + kx;
                    if (ix < 0 || ix >= w) continue;
                    acc +=
                      x[(cc * h + iy) * w + ix] *
                      kernel[((k * ci + cc) * kh + ky) * kw + kx];
                  }
                }
              }
              y[(k * oh + oy) * ow + ox] = acc;
            }
          }
        }
        x = y;
        shape = [co, oh, ow];
        break;
      }
      case "MaxPool2D": {
        const { windowY: wh, windowX: ww, strideY: sh, strideX: sw } = layer;
        const [c, h, w] = shape;
        const oh = Math.floor((h - wh) / sh) + 1;
        const ow = Math.floor((w - ww) / sw) + 1;
        const y = new Float64Array(c * oh * ow);
        for (let cc = 0; cc < c; cc++) {
          for (let oy = 0; oy < oh; oy++) {
            for (let ox = 0; ox < ow; ox++) {
              let best = -Infinity;
              for (let ky = 0; ky < wh; ky++) {
                for (let kx = 0; kx < ww; kx++) {
                  const v = x[(cc * h + (oy * sh + ky)) * w + (ox * sw + kx)];
                  if (v > best) best = v;
                }
              }
              y[(cc * oh + oy) * ow + ox] = best;
            }
          }
        }
        x = y;
        shape = [c, oh, ow];
        break;
      }
      case "ReLU": {
        x = x.map((v) => (v > 0 ? v : 0));
        break;
      }
      case "Flatten": {
        shape = [x.length];
        break;
      }
      default:
        throw new ExportError(`unknown portable layer kind ${(layer as { kind: string }).kind}`);
    }
  }
  return x;
}
