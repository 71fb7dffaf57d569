/** Readers for .npy arrays and .npz archives (zip of .npy entries). */

import * as zlib from "node:zlib";
import { NDArray, DType } from "./pickle.js";

function parseDescr(descr: string): DType {
	const m = /^([<>|=]?)([biuf])(\d+)$/.exec(descr);
	if (!m) throw new Error(`unsupported npy dtype ${descr}`);
	return {
		kind: m[2] as DType["kind"],
		itemsize: parseInt(m[3], 10),
		littleEndian: m[1] !== ">",
	};
}

export function parseNpy(buf: Buffer): NDArray {
	if (buf.toString("latin1", 0, 6) !== "\x93NUMPY") {
		throw new Error("not an npy file");
	}
	const major = buf[6];
	const headerLen = major >= 2 ? buf.readUInt32LE(8) : buf.readUInt16LE(8);
	const headerEnd = (major >= 2 ? 12 : 10) + headerLen;
	const header = buf.toString("latin1", major >= 2 ? 12 : 10, headerEnd);

	const descr = /'descr':\s*'([^']+)'/.exec(header);
	const fortran = /'fortran_order':\s*(True|False)/.exec(header);
	const shape = /'shape':\s*\(([^)]*)\)/.exec(header);
	if (!descr || !fortran || !shape) {
		throw new Error(`malformed npy header: ${header}`);
	}
	const dims = shape[1]
		.split(",")
		.map((s) => s.trim())
		.filter((s) => s.length > 0)
		.map((s) => parseInt(s, 10));
	return new NDArray(
		dims,
		parseDescr(descr[1]),
		Buffer.from(buf.subarray(headerEnd)),
		fortran[1] === "True",
	);
}

/** Minimal zip reader via the central directory; stored and deflated entries. */
export function readZip(buf: Buffer): Map<string, Buffer> {
	// Locate end-of-central-directory (no zip64 support needed at these sizes).
	let eocd = -1;
	for (let i = buf.length - 22; i >= Math.max(0, buf.length - 22 - 65536); i--) {
		if (buf.readUInt32LE(i) === 0x06054b50) {
			eocd = i;
			break;
		}
	}
	if (eocd < 0) throw new Error("zip end-of-central-directory not found");
	const count = buf.readUInt16LE(eocd + 10);
	let off = buf.readUInt32LE(eocd + 16);

	const entries = new Map<string, Buffer>();
	for (let k = 0; k < count; k++) {
		if (buf.readUInt32LE(off) !== 0x02014b50) {
			throw new Error("bad central-directory entry");
		}
		const method = buf.readUInt16LE(off + 10);
		const compSize = buf.readUInt32LE(off + 20);
		const nameLen = buf.readUInt16LE(off + 28);
		const extraLen = buf.readUInt16LE(off + 30);
		const commentLen = buf.readUInt16LE(off + 32);
		const localOff = buf.readUInt32LE(off + 42);
		const name = buf.toString("utf8", off + 46, off + 46 + nameLen);

		const localNameLen = buf.readUInt16LE(localOff + 26);
		const localExtraLen = buf.readUInt16LE(localOff + 28);
		const dataStart = localOff + 30 + localNameLen + localExtraLen;
		const raw = buf.subarray(dataStart, dataStart + compSize);
		entries.set(
			name,
			method === 0
				? Buffer.from(raw)
				: method === 8
					? zlib.inflateRawSync(raw)
					: (() => {
							throw new Error(`unsupported zip method ${method}`);
						})(),
		);
		off += 46 + nameLen + extraLen + commentLen;
	}
	return entries;
}

export function readNpz(buf: Buffer): Map<string, NDArray> {
	const out = new Map<string, NDArray>();
	for (const [name, data] of readZip(buf)) {
		out.set(name.replace(/\.npy$/, ""), parseNpy(data));
	}
	return out;
}
