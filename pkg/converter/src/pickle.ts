/**
 * Minimal pickle reader for the object shapes found in citation-dataset
 * bundles: scipy CSR matrices, numpy arrays, dicts/defaultdicts of integer
 * lists, and the scalar types they contain.
 *
 * Supports protocols 0-5 opcodes as far as those objects need, including the
 * Python-2 string opcodes (raw bytes) and the `_codecs.encode(..., 'latin1')`
 * byte-smuggling that protocol-2 numpy pickles use. Module renames across
 * Python/numpy/scipy versions are aliased.
 */

export interface DType {
	kind: "b" | "i" | "u" | "f";
	itemsize: number;
	littleEndian: boolean;
}

export class NDArray {
	constructor(
		public shape: number[],
		public dtype: DType,
		public data: Buffer,
		public fortran = false,
	) {}

	get size(): number {
		return this.shape.reduce((a, b) => a * b, 1);
	}

	/** Flat values in row-major order (fortran layouts are rejected). */
	toNumbers(): number[] {
		if (this.fortran && this.shape.length > 1) {
			throw new Error("fortran-ordered arrays are not supported");
		}
		const { kind, itemsize, littleEndian } = this.dtype;
		const n = this.size;
		if (this.data.length < n * itemsize) {
			throw new Error(
				`array buffer holds ${this.data.length} bytes, need ${n * itemsize}`,
			);
		}
		const out = new Array<number>(n);
		const d = this.data;
		for (let i = 0; i < n; i++) {
			const off = i * itemsize;
			if (kind === "f") {
				out[i] =
					itemsize === 8
						? littleEndian
							? d.readDoubleLE(off)
							: d.readDoubleBE(off)
						: littleEndian
							? d.readFloatLE(off)
							: d.readFloatBE(off);
			} else if (kind === "b") {
				out[i] = d[off] ? 1 : 0;
			} else if (kind === "i") {
				out[i] = Number(
					itemsize === 8
						? littleEndian
							? d.readBigInt64LE(off)
							: d.readBigInt64BE(off)
						: itemsize === 4
							? littleEndian
								? d.readInt32LE(off)
								: d.readInt32BE(off)
							: itemsize === 2
								? littleEndian
									? d.readInt16LE(off)
									: d.readInt16BE(off)
								: d.readInt8(off),
				);
			} else {
				out[i] = Number(
					itemsize === 8
						? littleEndian
							? d.readBigUInt64LE(off)
							: d.readBigUInt64BE(off)
						: itemsize === 4
							? littleEndian
								? d.readUInt32LE(off)
								: d.readUInt32BE(off)
							: itemsize === 2
								? littleEndian
									? d.readUInt16LE(off)
									: d.readUInt16BE(off)
								: d.readUInt8(off),
				);
			}
		}
		return out;
	}
}

export class CsrMatrix {
	constructor(
		public rows: number,
		public cols: number,
		public data: NDArray,
		public indices: NDArray,
		public indptr: NDArray,
	) {}

	/** Dense row-major expansion as a plain number array. */
	toDense(): Float64Array {
		const out = new Float64Array(this.rows * this.cols);
		const indptr = this.indptr.toNumbers();
		const indices = this.indices.toNumbers();
		const data = this.data.toNumbers();
		for (let r = 0; r < this.rows; r++) {
			for (let e = indptr[r]; e < indptr[r + 1]; e++) {
				out[r * this.cols + indices[e]] = data[e];
			}
		}
		return out;
	}
}

type Value = unknown;

class GlobalRef {
	constructor(
		public module: string,
		public name: string,
	) {}

	get key(): string {
		return `${normalizeModule(this.module)}.${this.name}`;
	}
}

class PendingObject {
	state: Value = null;
	constructor(public cls: GlobalRef) {}
}

function normalizeModule(module: string): string {
	return module
		.replace(/^numpy\._core(\.|$)/, "numpy.core$1")
		.replace(/^scipy\.sparse\._(\w+)$/, "scipy.sparse.$1")
		.replace(/^__builtin__$/, "builtins");
}

function parseDtypeCode(code: string): DType {
	const m = /^([<>|=]?)([biuf])(\d+)$/.exec(code);
	if (!m) throw new Error(`unsupported dtype ${code}`);
	return {
		kind: m[2] as DType["kind"],
		itemsize: parseInt(m[3], 10),
		littleEndian: m[1] !== ">",
	};
}

function applyReduce(fn: Value, args: Value[]): Value {
	if (fn instanceof GlobalRef) {
		switch (fn.key) {
			case "_codecs.encode": {
				const [text, encoding] = args as [string, string];
				if (encoding !== "latin1" && encoding !== "latin-1") {
					throw new Error(`unexpected codec ${encoding}`);
				}
				return Buffer.from(text, "latin1");
			}
			case "numpy.core.multiarray._reconstruct":
				return new PendingObject(args[0] as GlobalRef);
			case "numpy.core.numeric._frombuffer": {
				const [buf, dtype, shape] = args as [Buffer, DType, number[]];
				return new NDArray(shape, dtype, buf);
			}
			case "numpy.dtype": {
				const dt = parseDtypeCode(args[0] as string);
				return dt;
			}
			case "collections.defaultdict":
				return new Map<Value, Value>();
			case "collections.OrderedDict":
				return new Map<Value, Value>();
			case "copyreg._reconstructor": {
				return new PendingObject(args[0] as GlobalRef);
			}
			default:
				throw new Error(`cannot reduce global ${fn.key}`);
		}
	}
	throw new Error(`REDUCE on a non-global callable`);
}

function applyBuild(target: Value, state: Value): Value {
	if (target instanceof PendingObject) {
		const key = target.cls.key;
		if (key === "numpy.ndarray") {
			const [, shape, dtype, fortran, raw] = state as [
				number,
				number[],
				Value,
				boolean,
				Value,
			];
			if (!(raw instanceof Buffer)) {
				throw new Error("object ndarrays are not supported");
			}
			return new NDArray(shape, dtype as DType, raw, fortran);
		}
		if (/^scipy\.sparse\.csr\.csr_(matrix|array)$/.test(key)) {
			const dict = state as Map<Value, Value>;
			const shape = dict.get("_shape") as number[];
			return new CsrMatrix(
				shape[0],
				shape[1],
				dict.get("data") as NDArray,
				dict.get("indices") as NDArray,
				dict.get("indptr") as NDArray,
			);
		}
		throw new Error(`cannot build instance of ${key}`);
	}
	if (isDType(target)) {
		// dtype.__setstate__: state[1] is the byte order character.
		const order = (state as Value[])[1] as string;
		if (order === ">") (target as DType).littleEndian = false;
		return target;
	}
	if (target instanceof Map && state instanceof Map) {
		for (const [k, v] of state) (target as Map<Value, Value>).set(k, v);
		return target;
	}
	throw new Error("BUILD on unsupported target");
}

function isDType(v: Value): boolean {
	return (
		typeof v === "object" &&
		v !== null &&
		!(v instanceof Map) &&
		"kind" in (v as object) &&
		"itemsize" in (v as object)
	);
}

const MARK = Symbol("mark");

export function loads(buf: Buffer): Value {
	let pos = 0;
	const stack: Value[] = [];
	const memo: Value[] = [];

	const u8 = () => buf[pos++];
	const u16 = () => {
		const v = buf.readUInt16LE(pos);
		pos += 2;
		return v;
	};
	const u32 = () => {
		const v = buf.readUInt32LE(pos);
		pos += 4;
		return v;
	};
	const i32 = () => {
		const v = buf.readInt32LE(pos);
		pos += 4;
		return v;
	};
	const line = () => {
		const end = buf.indexOf(0x0a, pos);
		if (end < 0) throw new Error("unterminated text opcode");
		const s = buf.toString("latin1", pos, end);
		pos = end + 1;
		return s;
	};
	const take = (n: number) => {
		const b = buf.subarray(pos, pos + n);
		pos += n;
		return Buffer.from(b);
	};
	const popMark = (): Value[] => {
		const idx = stack.lastIndexOf(MARK);
		if (idx < 0) throw new Error("no MARK on stack");
		const items = stack.splice(idx + 1);
		stack.pop();
		return items;
	};
	const memoPut = (i: number) => {
		memo[i] = stack[stack.length - 1];
	};

	for (;;) {
		const op = u8();
		switch (op) {
			case 0x80: // PROTO
				u8();
				break;
			case 0x95: // FRAME
				pos += 8;
				break;
			case 0x2e: // STOP
				return stack.pop();
			case 0x28: // MARK
				stack.push(MARK);
				break;
			case 0x30: // POP
				stack.pop();
				break;
			case 0x31: // POP_MARK
				popMark();
				break;
			case 0x32: // DUP
				stack.push(stack[stack.length - 1]);
				break;
			case 0x4e: // NONE
				stack.push(null);
				break;
			case 0x88: // NEWTRUE
				stack.push(true);
				break;
			case 0x89: // NEWFALSE
				stack.push(false);
				break;
			case 0x4b: // BININT1
				stack.push(u8());
				break;
			case 0x4d: // BININT2
				stack.push(u16());
				break;
			case 0x4a: // BININT
				stack.push(i32());
				break;
			case 0x8a: {
				// LONG1
				const n = u8();
				const bytes = take(n);
				let v = 0n;
				for (let i = n - 1; i >= 0; i--) v = (v << 8n) | BigInt(bytes[i]);
				if (n > 0 && bytes[n - 1] & 0x80) v -= 1n << BigInt(8 * n);
				stack.push(Number(v));
				break;
			}
			case 0x49: {
				// INT (text); 00/01 encode booleans
				const s = line();
				if (s === "00") stack.push(false);
				else if (s === "01") stack.push(true);
				else stack.push(parseInt(s, 10));
				break;
			}
			case 0x4c: // LONG (text)
				stack.push(parseInt(line().replace(/L$/, ""), 10));
				break;
			case 0x47: {
				// BINFLOAT (big-endian double)
				const v = buf.readDoubleBE(pos);
				pos += 8;
				stack.push(v);
				break;
			}
			case 0x46: // FLOAT (text)
				stack.push(parseFloat(line()));
				break;
			case 0x58: // BINUNICODE
				stack.push(take(u32()).toString("utf8"));
				break;
			case 0x8c: // SHORT_BINUNICODE
				stack.push(take(u8()).toString("utf8"));
				break;
			case 0x56: // UNICODE (text, raw-unicode-escape)
				stack.push(line());
				break;
			case 0x55: // SHORT_BINSTRING (py2 str: raw bytes)
				stack.push(take(u8()));
				break;
			case 0x54: // BINSTRING
				stack.push(take(u32()));
				break;
			case 0x53: {
				// STRING (text repr)
				const s = line();
				const inner = s.replace(/^['"]|['"]$/g, "");
				const bytes: number[] = [];
				for (let i = 0; i < inner.length; i++) {
					if (inner[i] === "\\") {
						const c = inner[++i];
						if (c === "x") {
							bytes.push(parseInt(inner.slice(i + 1, i + 3), 16));
							i += 2;
						} else if (c === "n") bytes.push(10);
						else if (c === "t") bytes.push(9);
						else if (c === "r") bytes.push(13);
						else if (c === "\\") bytes.push(92);
						else if (c === "'") bytes.push(39);
						else if (c === '"') bytes.push(34);
						else bytes.push(c.charCodeAt(0));
					} else {
						bytes.push(inner.charCodeAt(i));
					}
				}
				stack.push(Buffer.from(bytes));
				break;
			}
			case 0x42: // BINBYTES
				stack.push(take(u32()));
				break;
			case 0x43: // SHORT_BINBYTES
				stack.push(take(u8()));
				break;
			case 0x8e: {
				// BINBYTES8
				const n = Number(buf.readBigUInt64LE(pos));
				pos += 8;
				stack.push(take(n));
				break;
			}
			case 0x85: // TUPLE1
				stack.push([stack.pop()]);
				break;
			case 0x86: {
				// TUPLE2
				const b2 = stack.pop();
				const a2 = stack.pop();
				stack.push([a2, b2]);
				break;
			}
			case 0x87: {
				// TUPLE3
				const c3 = stack.pop();
				const b3 = stack.pop();
				const a3 = stack.pop();
				stack.push([a3, b3, c3]);
				break;
			}
			case 0x74: // TUPLE
				stack.push(popMark());
				break;
			case 0x29: // EMPTY_TUPLE
				stack.push([]);
				break;
			case 0x5d: // EMPTY_LIST
				stack.push([]);
				break;
			case 0x6c: // LIST
				stack.push(popMark());
				break;
			case 0x7d: // EMPTY_DICT
				stack.push(new Map<Value, Value>());
				break;
			case 0x64: {
				// DICT
				const items = popMark();
				const map = new Map<Value, Value>();
				for (let i = 0; i < items.length; i += 2) map.set(items[i], items[i + 1]);
				stack.push(map);
				break;
			}
			case 0x61: {
				// APPEND
				const v = stack.pop();
				(stack[stack.length - 1] as Value[]).push(v);
				break;
			}
			case 0x65: {
				// APPENDS
				const items = popMark();
				(stack[stack.length - 1] as Value[]).push(...items);
				break;
			}
			case 0x73: {
				// SETITEM
				const v = stack.pop();
				const k = stack.pop();
				(stack[stack.length - 1] as Map<Value, Value>).set(k, v);
				break;
			}
			case 0x75: {
				// SETITEMS
				const items = popMark();
				const map = stack[stack.length - 1] as Map<Value, Value>;
				for (let i = 0; i < items.length; i += 2) map.set(items[i], items[i + 1]);
				break;
			}
			case 0x71: // BINPUT
				memoPut(u8());
				break;
			case 0x72: // LONG_BINPUT
				memoPut(u32());
				break;
			case 0x70: // PUT (text)
				memoPut(parseInt(line(), 10));
				break;
			case 0x94: // MEMOIZE
				memo.push(stack[stack.length - 1]);
				break;
			case 0x68: // BINGET
				stack.push(memo[u8()]);
				break;
			case 0x6a: // LONG_BINGET
				stack.push(memo[u32()]);
				break;
			case 0x67: // GET (text)
				stack.push(memo[parseInt(line(), 10)]);
				break;
			case 0x63: // GLOBAL
				stack.push(new GlobalRef(line(), line()));
				break;
			case 0x93: {
				// STACK_GLOBAL
				const name = stack.pop() as string;
				const module = stack.pop() as string;
				stack.push(new GlobalRef(module, name));
				break;
			}
			case 0x52: {
				// REDUCE
				const args = stack.pop() as Value[];
				const fn = stack.pop();
				stack.push(applyReduce(fn, args));
				break;
			}
			case 0x81: {
				// NEWOBJ
				stack.pop(); // constructor args (always empty here)
				const cls = stack.pop() as GlobalRef;
				stack.push(new PendingObject(cls));
				break;
			}
			case 0x62: {
				// BUILD
				const state = stack.pop();
				const target = stack.pop();
				stack.push(applyBuild(target, state));
				break;
			}
			default:
				throw new Error(
					`unsupported pickle opcode 0x${op.toString(16)} at ${pos - 1}`,
				);
		}
	}
}
