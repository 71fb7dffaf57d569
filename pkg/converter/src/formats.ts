/**
 * Portable dataset directory writers and the conversion manifest.
 *
 * Output contract (consumed by the training engine's loader):
 *   meta.json     {"name", "num_nodes", "num_features", "num_classes"}
 *   edges.tsv     "u<TAB>v" per undirected edge, u < v, listed once, no header
 *   features.bin  little-endian float32, row-major, num_nodes x num_features
 *   labels.tsv    "node<TAB>class" for labeled nodes only
 *   splits.json   [{"train": [...], "val": [...], "test": [...]}, ...]
 *   manifest.json source checksums, emitted sizes, count echoes
 *
 * Every writer is deterministic, so converting the same input twice yields
 * byte-identical directories.
 */

import * as crypto from "node:crypto";
import * as fs from "node:fs";
import * as path from "node:path";

export interface Split {
	train: number[];
	val: number[];
	test: number[];
}

export interface Dataset {
	name: string;
	numNodes: number;
	numFeatures: number;
	numClasses: number;
	/** Undirected edges, canonicalized u < v, sorted, deduplicated. */
	edges: Array<[number, number]>;
	/** Row-major float32 features. */
	features: Float32Array;
	/** Per-node class index, -1 for unlabeled. */
	labels: number[];
	splits: Split[];
}

export interface EdgeCleanup {
	selfLoopsRemoved: number;
	duplicatesRemoved: number;
}

export interface Manifest {
	format: string;
	name: string;
	num_nodes: number;
	num_features: number;
	num_classes: number;
	num_edges: number;
	num_splits: number;
	splits_source: string;
	self_loops_removed: number;
	duplicate_edges_removed: number;
	source_checksums: Record<string, string>;
	emitted: Record<string, { bytes: number; sha256: string }>;
}

/** Symmetrize (union of directions), deduplicate, and drop self-loops. */
export function canonicalizeEdges(
	raw: Iterable<[number, number]>,
): { edges: Array<[number, number]>; cleanup: EdgeCleanup } {
	const seen = new Set<number>();
	const edges: Array<[number, number]> = [];
	let selfLoops = 0;
	let duplicates = 0;
	let maxNode = 0;
	const pending: Array<[number, number]> = [];
	for (const [u, v] of raw) {
		maxNode = Math.max(maxNode, u, v);
		pending.push([u, v]);
	}
	const width = maxNode + 1;
	for (const [u, v] of pending) {
		if (u === v) {
			selfLoops++;
			continue;
		}
		const [a, b] = u < v ? [u, v] : [v, u];
		const key = a * width + b;
		if (seen.has(key)) {
			duplicates++;
			continue;
		}
		seen.add(key);
		edges.push([a, b]);
	}
	edges.sort((x, y) => x[0] - y[0] || x[1] - y[1]);
	return { edges, cleanup: { selfLoopsRemoved: selfLoops, duplicatesRemoved: duplicates } };
}

export function sha256(data: Buffer | string): string {
	return crypto.createHash("sha256").update(data).digest("hex");
}

export function checksumFiles(dir: string, names: string[]): Record<string, string> {
	const out: Record<string, string> = {};
	for (const name of names.slice().sort()) {
		out[name] = sha256(fs.readFileSync(path.join(dir, name)));
	}
	return out;
}

export function writeDataset(
	dataset: Dataset,
	outDir: string,
	meta: {
		format: string;
		sourceChecksums: Record<string, string>;
		splitsSource: string;
		cleanup: EdgeCleanup;
	},
): Manifest {
	fs.mkdirSync(outDir, { recursive: true });

	const files: Record<string, Buffer> = {};
	files["meta.json"] = Buffer.from(
		JSON.stringify(
			{
				name: dataset.name,
				num_nodes: dataset.numNodes,
				num_features: dataset.numFeatures,
				num_classes: dataset.numClasses,
			},
			null,
			2,
		) + "\n",
	);
	files["edges.tsv"] = Buffer.from(
		dataset.edges.map(([u, v]) => `${u}\t${v}\n`).join(""),
	);
	files["features.bin"] = Buffer.from(
		dataset.features.buffer,
		dataset.features.byteOffset,
		dataset.features.byteLength,
	);
	files["labels.tsv"] = Buffer.from(
		dataset.labels
			.map((c, i) => (c >= 0 ? `${i}\t${c}\n` : ""))
			.join(""),
	);
	files["splits.json"] = Buffer.from(JSON.stringify(dataset.splits) + "\n");

	const emitted: Manifest["emitted"] = {};
	for (const [name, data] of Object.entries(files)) {
		fs.writeFileSync(path.join(outDir, name), data);
		emitted[name] = { bytes: data.length, sha256: sha256(data) };
	}

	const manifest: Manifest = {
		format: meta.format,
		name: dataset.name,
		num_nodes: dataset.numNodes,
		num_features: dataset.numFeatures,
		num_classes: dataset.numClasses,
		num_edges: dataset.edges.length,
		num_splits: dataset.splits.length,
		splits_source: meta.splitsSource,
		self_loops_removed: meta.cleanup.selfLoopsRemoved,
		duplicate_edges_removed: meta.cleanup.duplicatesRemoved,
		source_checksums: meta.sourceChecksums,
		emitted,
	};
	fs.writeFileSync(
		path.join(outDir, "manifest.json"),
		JSON.stringify(manifest, null, 2) + "\n",
	);
	return manifest;
}

/** Little-endian float32 check is a no-op on LE hosts; enforce anyway. */
export function toLittleEndianF32(values: Float32Array): Float32Array {
	const probe = new Uint8Array(new Float32Array([1]).buffer);
	if (probe[0] !== 0) return values; // already little-endian host
	const out = new Float32Array(values.length);
	const view = new DataView(out.buffer);
	for (let i = 0; i < values.length; i++) view.setFloat32(i * 4, values[i], true);
	return out;
}
