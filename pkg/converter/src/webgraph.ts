/**
 * Converter for web-page graph datasets shipped as text files:
 *
 *   out1_node_feature_label.txt   "id <TAB> f1,f2,... <TAB> label" with header
 *   out1_graph_edges.txt          "u <TAB> v" directed edges with header
 *   NAME_split_0.6_0.2_K.npz      ten boolean-mask splits (train/val/test)
 *
 * Directed edges are symmetrized (union of both directions) before
 * deduplication. When no split masks are present, ten per-class-stratified
 * 60/20/20 splits are generated with a fixed-seed generator so conversion
 * stays byte-deterministic.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { readNpz } from "./npy.js";
import {
	Dataset,
	Manifest,
	Split,
	canonicalizeEdges,
	checksumFiles,
	writeDataset,
} from "./formats.js";

const NODE_FILE = "out1_node_feature_label.txt";
const EDGE_FILE = "out1_graph_edges.txt";

export function convertWebgraph(
	srcDir: string,
	name: string,
	outDir: string,
): Manifest {
	for (const f of [NODE_FILE, EDGE_FILE]) {
		if (!fs.existsSync(path.join(srcDir, f))) {
			throw new Error(`missing source file ${f} in ${srcDir}`);
		}
	}

	const nodeLines = readLines(path.join(srcDir, NODE_FILE));
	const rows: Array<{ id: number; feats: number[]; label: number }> = [];
	for (const line of nodeLines) {
		const [idStr, featStr, labelStr] = line.split("\t");
		if (!/^\d+$/.test(idStr)) continue; // header
		rows.push({
			id: parseInt(idStr, 10),
			feats: featStr.split(",").map(Number),
			label: parseInt(labelStr, 10),
		});
	}
	if (rows.length === 0) throw new Error(`${NODE_FILE} holds no node rows`);
	const numNodes = Math.max(...rows.map((r) => r.id)) + 1;
	if (rows.length !== numNodes) {
		throw new Error(`node ids not contiguous: ${rows.length} rows, max id ${numNodes - 1}`);
	}
	const d = rows[0].feats.length;
	const features = new Float32Array(numNodes * d);
	const labels = new Array<number>(numNodes).fill(-1);
	for (const row of rows) {
		if (row.feats.length !== d) {
			throw new Error(`node ${row.id} has ${row.feats.length} features, expected ${d}`);
		}
		features.set(Float32Array.from(row.feats), row.id * d);
		labels[row.id] = row.label;
	}
	const numClasses = Math.max(...labels) + 1;

	const rawEdges: Array<[number, number]> = [];
	for (const line of readLines(path.join(srcDir, EDGE_FILE))) {
		const [a, b] = line.split("\t");
		if (!/^\d+$/.test(a)) continue; // header
		rawEdges.push([parseInt(a, 10), parseInt(b, 10)]);
	}
	const { edges, cleanup } = canonicalizeEdges(rawEdges);

	const maskFiles = fs
		.readdirSync(srcDir)
		.filter((f) => f.startsWith(`${name}_split_`) && f.endsWith(".npz"))
		.sort();
	let splits: Split[];
	let splitsSource: string;
	if (maskFiles.length > 0) {
		splits = maskFiles.map((f) =>
			splitFromMasks(fs.readFileSync(path.join(srcDir, f)), f),
		);
		splitsSource = `published:${maskFiles.length}`;
	} else {
		splits = generateStratifiedSplits(labels, numClasses, 10, 0);
		splitsSource = "generated:seed=0";
	}

	const dataset: Dataset = {
		name,
		numNodes,
		numFeatures: d,
		numClasses,
		edges,
		features,
		labels,
		splits,
	};
	return writeDataset(dataset, outDir, {
		format: "webgraph",
		sourceChecksums: checksumFiles(srcDir, [NODE_FILE, EDGE_FILE, ...maskFiles]),
		splitsSource,
		cleanup,
	});
}

function readLines(file: string): string[] {
	return fs
		.readFileSync(file, "utf8")
		.split("\n")
		.map((l) => l.trim())
		.filter((l) => l.length > 0);
}

function splitFromMasks(buf: Buffer, fileName: string): Split {
	const arrays = readNpz(buf);
	const pick = (key: string): number[] => {
		const arr = arrays.get(key);
		if (!arr) throw new Error(`${fileName} lacks ${key}`);
		return arr
			.toNumbers()
			.map((v, i) => (v ? i : -1))
			.filter((i) => i >= 0);
	};
	return { train: pick("train_mask"), val: pick("val_mask"), test: pick("test_mask") };
}

/** Deterministic 32-bit generator (mulberry32) for reproducible splits. */
function mulberry32(seed: number): () => number {
	let state = seed >>> 0;
	return () => {
		state = (state + 0x6d2b79f5) >>> 0;
		let t = state;
		t = Math.imul(t ^ (t >>> 15), t | 1);
		t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
		return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
	};
}

export function generateStratifiedSplits(
	labels: number[],
	numClasses: number,
	numSplits: number,
	seed: number,
): Split[] {
	const byClass: number[][] = Array.from({ length: numClasses }, () => []);
	labels.forEach((c, i) => {
		if (c >= 0) byClass[c].push(i);
	});
	for (const [c, members] of byClass.entries()) {
		if (members.length < 5) {
			throw new Error(`class ${c} has ${members.length} nodes; cannot split 60/20/20`);
		}
	}
	const rand = mulberry32(seed);
	const splits: Split[] = [];
	for (let k = 0; k < numSplits; k++) {
		const train: number[] = [];
		const val: number[] = [];
		const test: number[] = [];
		for (const members of byClass) {
			const shuffled = [...members];
			for (let i = shuffled.length - 1; i > 0; i--) {
				const j = Math.floor(rand() * (i + 1));
				[shuffled[i], shuffled[j]] = [shuffled[j], shuffled[i]];
			}
			const nTrain = Math.round(0.6 * shuffled.length);
			const nVal = Math.round(0.2 * shuffled.length);
			train.push(...shuffled.slice(0, nTrain));
			val.push(...shuffled.slice(nTrain, nTrain + nVal));
			test.push(...shuffled.slice(nTrain + nVal));
		}
		splits.push({
			train: train.sort((a, b) => a - b),
			val: val.sort((a, b) => a - b),
			test: test.sort((a, b) => a - b),
		});
	}
	return splits;
}
