/** Portable model document; field names and conventions follow docs/formats.md. */

export interface PortableDense {
  kind: "Dense";
  inputs: number;
  outputs: number;
  /** flat row-major [inputs][outputs]; entry (j, k) is the edge j -> k */
  weights: number[];
  bias: number[];
}

export interface PortableConv2D {
  kind: "Conv2D";
  outChannels: number;
  inChannels: number;
  kernelHeight: number;
  kernelWidth: number;
  strideY: number;
  strideX: number;
  padY: number;
  padX: number;
  /** flat row-major [outChannels][inChannels][kernelHeight][kernelWidth] */
  kernel: number[];
  bias: number[];
}

export interface PortableReLU {
  kind: "ReLU";
}

export interface PortableFlatten {
  kind: "Flatten";
}

export interface PortableMaxPool2D {
  kind: "MaxPool2D";
  windowY: number;
  windowX: number;
  strideY: number;
  strideX: number;
}

export type PortableLayer =
  | PortableDense
  | PortableConv2D
  | PortableReLU
  | PortableFlatten
  | PortableMaxPool2D;

export interface PortableModel {
  formatVersion: 1;
  /** channel-first: [C, H, W] for images, [d] for vectors */
  inputShape: number[];
  numClasses: number;
  layers: PortableLayer[];
}

/** Conversion manifest supplied next to a source checkpoint. */
export interface ExportManifest {
  sourceFormat: string;
  /** source layer name -> portable layer kind it must become */
  layerMap: Record<string, string>;
  /** flat row-major inputs in the source layout; generated when absent */
  verificationInputs?: number[][];
}

export class ExportError extends Error {}
