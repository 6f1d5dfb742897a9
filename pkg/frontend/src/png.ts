// Minimal 8-bit grayscale PNG codec for sketch uploads and test fixtures.
// The encoder emits stored (uncompressed) zlib blocks, which every PNG
// reader accepts; the decoder handles exactly that subset plus filter 0,
// enough to round-trip our own output and the test server's fixtures.

import type { GrayRaster } from "./raster";

const SIGNATURE = [137, 80, 78, 71, 13, 10, 26, 10];

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(bytes: Uint8Array): number {
  let c = 0xffffffff;
  for (let i = 0; i < bytes.length; i++) {
    c = CRC_TABLE[(c ^ bytes[i]!) & 0xff]! ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

function adler32(bytes: Uint8Array): number {
  let a = 1;
  let b = 0;
  for (let i = 0; i < bytes.length; i++) {
    a = (a + bytes[i]!) % 65521;
    b = (b + a) % 65521;
  }
  return ((b << 16) | a) >>> 0;
}

function be32(value: number): number[] {
  return [(value >>> 24) & 0xff, (value >>> 16) & 0xff, (value >>> 8) & 0xff, value & 0xff];
}

function chunk(type: string, data: Uint8Array): Uint8Array {
  const body = new Uint8Array(4 + data.length);
  for (let i = 0; i < 4; i++) body[i] = type.charCodeAt(i);
  body.set(data, 4);
  const out = new Uint8Array(8 + data.length + 4);
  out.set(be32(data.length), 0);
  out.set(body, 4);
  out.set(be32(crc32(body)), 8 + data.length);
  return out;
}

function zlibStored(raw: Uint8Array): Uint8Array {
  const blocks: number[] = [0x78, 0x01];
  for (let off = 0; off < raw.length || off === 0; off += 65535) {
    const len = Math.min(65535, raw.length - off);
    const final = off + len >= raw.length ? 1 : 0;
    blocks.push(final, len & 0xff, (len >>> 8) & 0xff, ~len & 0xff, (~len >>> 8) & 0xff);
    for (let i = 0; i < len; i++) blocks.push(raw[off + i]!);
    if (final) break;
  }
  blocks.push(...be32(adler32(raw)));
  return new Uint8Array(blocks);
}

export function encodeGrayPng(raster: GrayRaster): Uint8Array {
  const { width, height, pixels } = raster;
  if (pixels.length !== width * height) {
    throw new Error("raster pixel count does not match its dimensions");
  }
  const ihdr = new Uint8Array(13);
  ihdr.set(be32(width), 0);
  ihdr.set(be32(height), 4);
  ihdr[8] = 8; // bit depth
  ihdr[9] = 0; // grayscale
  const raw = new Uint8Array(height * (width + 1));
  for (let y = 0; y < height; y++) {
    raw[y * (width + 1)] = 0; // filter: none
    raw.set(pixels.subarray(y * width, (y + 1) * width), y * (width + 1) + 1);
  }
  const parts = [
    new Uint8Array(SIGNATURE),
    chunk("IHDR", ihdr),
    chunk("IDAT", zlibStored(raw)),
    chunk("IEND", new Uint8Array(0)),
  ];
  const total = parts.reduce((n, p) => n + p.length, 0);
  const out = new Uint8Array(total);
  let off = 0;
  for (const p of parts) {
    out.set(p, off);
    off += p.length;
  }
  return out;
}

export function isPng(bytes: Uint8Array): boolean {
  if (bytes.length < 8) return false;
  return SIGNATURE.every((v, i) => bytes[i] === v);
}

function inflateStored(z: Uint8Array): Uint8Array {
  if (z.length < 6 || (z[0]! & 0x0f) !== 8) {
    throw new Error("not a zlib stream");
  }
  const out: number[] = [];
  let pos = 2;
  for (;;) {
    const header = z[pos]!;
    if ((header & 0x06) !== 0) {
      throw new Error("compressed deflate blocks are not supported here");
    }
    const len = z[pos + 1]! | (z[pos + 2]! << 8);
    pos += 5;
    for (let i = 0; i < len; i++) out.push(z[pos + i]!);
    pos += len;
    if (header & 1) break;
  }
  const raw = new Uint8Array(out);
  const sum =
    ((z[pos]! << 24) | (z[pos + 1]! << 16) | (z[pos + 2]! << 8) | z[pos + 3]!) >>> 0;
  if (adler32(raw) !== sum) {
    throw new Error("zlib checksum mismatch");
  }
  return raw;
}

interface PngInfo {
  width: number;
  height: number;
  bitDepth: number;
  colorType: number;
  interlace: number;
  idat: Uint8Array;
}

function parseChunks(bytes: Uint8Array): PngInfo {
  if (!isPng(bytes)) throw new Error("missing PNG signature");
  let pos = 8;
  const info: PngInfo = {
    width: 0, height: 0, bitDepth: 0, colorType: 0, interlace: 0,
    idat: new Uint8Array(0),
  };
  const idatParts: Uint8Array[] = [];
  while (pos + 12 <= bytes.length) {
    const len =
      ((bytes[pos]! << 24) | (bytes[pos + 1]! << 16) | (bytes[pos + 2]! << 8) | bytes[pos + 3]!) >>> 0;
    const type = String.fromCharCode(
      bytes[pos + 4]!, bytes[pos + 5]!, bytes[pos + 6]!, bytes[pos + 7]!,
    );
    const data = bytes.subarray(pos + 8, pos + 8 + len);
    if (type === "IHDR") {
      info.width = ((data[0]! << 24) | (data[1]! << 16) | (data[2]! << 8) | data[3]!) >>> 0;
      info.height = ((data[4]! << 24) | (data[5]! << 16) | (data[6]! << 8) | data[7]!) >>> 0;
      info.bitDepth = data[8]!;
      info.colorType = data[9]!;
      info.interlace = data[12]!;
    } else if (type === "IDAT") {
      idatParts.push(data);
    } else if (type === "IEND") {
      break;
    }
    pos += 12 + len;
  }
  const total = idatParts.reduce((n, p) => n + p.length, 0);
  info.idat = new Uint8Array(total);
  let off = 0;
  for (const p of idatParts) {
    info.idat.set(p, off);
    off += p.length;
  }
  return info;
}

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

function unfilter(raw: Uint8Array, width: number, height: number, bpp: number): Uint8Array {
  const stride = width * bpp;
  if (raw.length !== height * (stride + 1)) {
    throw new Error("scanline payload does not match the declared size");
  }
  const out = new Uint8Array(height * stride);
  for (let y = 0; y < height; y++) {
    const filter = raw[y * (stride + 1)]!;
    const src = raw.subarray(y * (stride + 1) + 1, (y + 1) * (stride + 1));
    const row = y * stride;
    const prev = row - stride;
    for (let x = 0; x < stride; x++) {
      const left = x >= bpp ? out[row + x - bpp]! : 0;
      const up = y > 0 ? out[prev + x]! : 0;
      const upLeft = y > 0 && x >= bpp ? out[prev + x - bpp]! : 0;
      let v = src[x]!;
      if (filter === 1) v += left;
      else if (filter === 2) v += up;
      else if (filter === 3) v += (left + up) >> 1;
      else if (filter === 4) v += paeth(left, up, upLeft);
      else if (filter !== 0) throw new Error(`unsupported filter ${filter}`);
      out[row + x] = v & 0xff;
    }
  }
  return out;
}

function toGray(data: Uint8Array, width: number, height: number, colorType: number): GrayRaster {
  const pixels = new Uint8Array(width * height);
  if (colorType === 0) {
    pixels.set(data);
  } else {
    const channels = colorType === 2 ? 3 : 4; // RGB or RGBA; alpha ignored
    for (let i = 0; i < width * height; i++) {
      const r = data[i * channels]!;
      const g = data[i * channels + 1]!;
      const b = data[i * channels + 2]!;
      pixels[i] = Math.round((r * 299 + g * 587 + b * 114) / 1000);
    }
  }
  return { width, height, pixels };
}

// Synchronous decode of this module's own encoder output (stored-deflate
// grayscale, filter 0 only). Used by the deterministic round-trip tests.
export function decodeGrayPng(bytes: Uint8Array): GrayRaster {
  const info = parseChunks(bytes);
  if (info.bitDepth !== 8 || info.colorType !== 0) {
    throw new Error("only 8-bit grayscale is supported here");
  }
  const raw = inflateStored(info.idat);
  return toGray(unfilter(raw, info.width, info.height, 1), info.width, info.height, 0);
}

async function inflateNative(z: Uint8Array): Promise<Uint8Array> {
  const stream = new Blob([z as BlobPart]).stream()
    .pipeThrough(new DecompressionStream("deflate"));
  return new Uint8Array(await new Response(stream).arrayBuffer());
}

// General decode for server-produced templates: any zlib deflate, filters
// 0-4, 8-bit grayscale/RGB/RGBA (color collapses to ITU-R 601 luminance).
export async function decodePngToGray(bytes: Uint8Array): Promise<GrayRaster> {
  const info = parseChunks(bytes);
  if (info.bitDepth !== 8 || ![0, 2, 6].includes(info.colorType) || info.interlace !== 0) {
    throw new Error(
      `unsupported PNG layout: depth ${info.bitDepth}, color ${info.colorType}, interlace ${info.interlace}`,
    );
  }
  const bpp = info.colorType === 0 ? 1 : info.colorType === 2 ? 3 : 4;
  const raw = await inflateNative(info.idat);
  const data = unfilter(raw, info.width, info.height, bpp);
  return toGray(data, info.width, info.height, info.colorType);
}
