export { readBundle, writeBundle, getEntry } from "./bundle.js";
export type { BundleEntry, DType } from "./bundle.js";
export { DiscoboxClient } from "./client.js";
export type { ClientOptions, EvalReport, RunResult } from "./client.js";
