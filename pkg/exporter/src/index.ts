export { convertModel, toChannelFirst } from "./convert";
export { evalPortable } from "./evalPortable";
export { evalSource } from "./evalSource";
export { exportModel, loadManifest, writePortable, VERIFICATION_TOLERANCE } from "./export";
export { loadTfjsModel } from "./tfjs";
export type { ExportManifest, PortableLayer, PortableModel } from "./types";
export { ExportError } from "./types";
