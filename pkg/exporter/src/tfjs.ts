/** Loader for TF.js layers-model artifacts: model.json plus binary weight shards. */

import * as fs from "fs";
import * as path from "path";

import { ExportError } from "./types";

export interface SourceLayer {
  className: string;
  name: string;
  config: Record<string, unknown>;
}

export interface SourceModel {
  /** layer stack in forward order */
  layers: SourceLayer[];
  /** source input shape without the batch axis (channels-last for images) */
  inputShape: number[];
  /** weight name (e.g. "dense/kernel") -> { shape, float64 data } */
  weights: Map<string, { shape: number[]; data: Float64Array }>;
}

function asObject(value: unknown, where: string): Record<string, unknown> {
  if (typeof value !== "object" || value === null || Array.isArray(value)) {
    throw new ExportError(`${where}: expected an object`);
  }
  return value as Record<string, unknown>;
}

export function loadTfjsModel(dir: string): SourceModel {
  const modelPath = path.join(dir, "model.json");
  if (!fs.existsSync(modelPath)) {
    throw new ExportError(`missing ${modelPath}`);
  }
  let doc: unknown;
  try {
    doc = JSON.parse(fs.readFileSync(modelPath, "utf-8"));
  } catch (e) {
    throw new ExportError(`${modelPath}: invalid JSON (${(e as Error).message})`);
  }
  const root = asObject(doc, "model.json");
  const topology = asObject(root.modelTopology, "modelTopology");
  const modelConfig = asObject(topology.model_config, "model_config");
  if (modelConfig.class_name !== "Sequential") {
    throw new ExportError(
      `unsupported source architecture ${String(modelConfig.class_name)}; only Sequential stacks are handled`
    );
  }
  const config = asObject(modelConfig.config, "model_config.config");
  const rawLayers = config.layers;
  if (!Array.isArray(rawLayers)) {
    throw new ExportError("model_config.config.layers: expected a list");
  }

  const layers: SourceLayer[] = [];
  let inputShape: number[] | null = null;
  for (const raw of rawLayers) {
    const layer = asObject(raw, "layer");
    const layerConfig = asObject(layer.config, "layer.config");
    const className = String(layer.class_name);
    if (className === "InputLayer") {
      const batchShape = (layerConfig.batch_input_shape ?? layerConfig.batch_shape) as number[];
      inputShape = batchShape.slice(1).map(Number);
      continue;
    }
    if (inputShape === null && Array.isArray(layerConfig.batch_input_shape)) {
      inputShape = (layerConfig.batch_input_shape as (number | null)[]).slice(1).map(Number);
    }
    layers.push({
      className,
      name: String(layerConfig.name ?? className.toLowerCase()),
      config: layerConfig,
    });
  }
  if (inputShape === null) {
    throw new ExportError("source model declares no input shape");
  }

  const manifest = root.weightsManifest;
  if (!Array.isArray(manifest)) {
    throw new ExportError("model.json: missing weightsManifest");
  }
  const weights = new Map<string, { shape: number[]; data: Float64Array }>();
  for (const groupRaw of manifest) {
    const group = asObject(groupRaw, "weightsManifest entry");
    const paths = group.paths as string[];
    const specs = group.weights as { name: string; shape: number[]; dtype: string }[];
    const buffers = paths.map((p) => {
      const shardPath = path.join(dir, p);
      if (!fs.existsSync(shardPath)) {
        throw new ExportError(`missing weight shard ${shardPath}`);
      }
      return fs.readFileSync(shardPath);
    });
    const blob = Buffer.concat(buffers);
    let offset = 0;
    for (const spec of specs) {
      if (spec.dtype !== "float32") {
        throw new ExportError(`weight ${spec.name}: unsupported dtype ${spec.dtype}`);
      }
      const count = spec.shape.reduce((a, b) => a * b, 1);
      const bytes = count * 4;
      if (offset + bytes > blob.length) {
        throw new ExportError(
          `weight shard truncated: ${spec.name} needs ${bytes} bytes at offset ${offset}, have ${blob.length}`
        );
      }
      const data = new Float64Array(count);
      for (let i = 0; i < count; i++) {
        data[i] = blob.readFloatLE(offset + i * 4);
      }
      weights.set(spec.name, { shape: spec.shape.slice(), data });
      offset += bytes;
    }
    if (offset !== blob.length) {
      throw new ExportError(
        `weight shard has ${blob.length - offset} trailing bytes not covered by the manifest`
      );
    }
  }
  return { layers, inputShape, weights };
}

export function getWeight(
  model: SourceModel,
  layerName: string,
  suffix: "kernel" | "bias"
): { shape: number[]; data: Float64Array } {
  const key = `${layerName}/${suffix}`;
  const found = model.weights.get(key);
  if (!found) {
    throw new ExportError(`missing weight ${key} in the checkpoint`);
  }
  return found;
}
