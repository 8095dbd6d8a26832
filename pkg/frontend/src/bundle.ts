/**
 * Reader/writer for the engine's tensor-bundle container.
 *
 * Layout: 4-byte magic "DBXB", u32 LE version, u32 LE manifest length,
 * UTF-8 JSON manifest, then the raw little-endian array blob. Arrays are
 * float32 or uint8. Writing then reading returns the bytes unchanged.
 */

const MAGIC = "DBXB";
const VERSION = 1;

export type DType = "f32" | "u8";

export interface BundleEntry {
  name: string;
  dtype: DType;
  shape: number[];
  data: Float32Array | Uint8Array;
}

interface ManifestRecord {
  name: string;
  dtype: DType;
  shape: number[];
  offset: number;
}

function elementCount(shape: number[]): number {
  return shape.reduce((a, b) => a * b, 1);
}

function byteLength(dtype: DType, shape: number[]): number {
  return elementCount(shape) * (dtype === "f32" ? 4 : 1);
}

/** Decode a bundle buffer into its named arrays (insertion order kept). */
export function readBundle(buf: Buffer): BundleEntry[] {
  if (buf.length < 12 || buf.toString("latin1", 0, 4) !== MAGIC) {
    throw new Error("not a DBXB bundle");
  }
  const version = buf.readUInt32LE(4);
  if (version !== VERSION) {
    throw new Error(`unsupported bundle version ${version}`);
  }
  const mlen = buf.readUInt32LE(8);
  if (12 + mlen > buf.length) {
    throw new Error("truncated manifest");
  }
  const manifest = JSON.parse(
    buf.toString("utf-8", 12, 12 + mlen),
  ) as ManifestRecord[];
  const blobStart = 12 + mlen;
  const entries: BundleEntry[] = [];
  for (const rec of manifest) {
    const nbytes = byteLength(rec.dtype, rec.shape);
    const start = blobStart + rec.offset;
    if (start + nbytes > buf.length) {
      throw new Error(`truncated blob for array ${rec.name}`);
    }
    // Copy out so the typed array is aligned and independent of `buf`.
    const bytes = Uint8Array.prototype.slice.call(buf, start, start + nbytes);
    const data =
      rec.dtype === "f32"
        ? new Float32Array(bytes.buffer, 0, nbytes / 4)
        : new Uint8Array(bytes.buffer, 0, nbytes);
    entries.push({ name: rec.name, dtype: rec.dtype, shape: rec.shape, data });
  }
  return entries;
}

/** Encode named arrays into a bundle buffer the engine can read. */
export function writeBundle(entries: BundleEntry[]): Buffer {
  const manifest: ManifestRecord[] = [];
  const parts: Buffer[] = [];
  let offset = 0;
  for (const e of entries) {
    if (e.data.length !== elementCount(e.shape)) {
      throw new Error(`array ${e.name}: data length does not match shape`);
    }
    manifest.push({ name: e.name, dtype: e.dtype, shape: e.shape, offset });
    const part = Buffer.from(e.data.buffer, e.data.byteOffset, e.data.byteLength);
    parts.push(part);
    offset += part.length;
  }
  // Match the engine's canonical manifest encoding: sorted keys, no spaces.
  const mtext = Buffer.from(
    JSON.stringify(
      manifest.map((r) => ({
        dtype: r.dtype,
        name: r.name,
        offset: r.offset,
        shape: r.shape,
      })),
    ),
    "utf-8",
  );
  const head = Buffer.alloc(12);
  head.write(MAGIC, 0, "latin1");
  head.writeUInt32LE(VERSION, 4);
  head.writeUInt32LE(mtext.length, 8);
  return Buffer.concat([head, mtext, ...parts]);
}

/** Find one array by name; throws when it is absent. */
export function getEntry(entries: BundleEntry[], name: string): BundleEntry {
  const hit = entries.find((e) => e.name === name);
  if (!hit) {
    throw new Error(`bundle has no array named ${name}`);
  }
  return hit;
}
