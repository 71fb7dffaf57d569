/**
 * Converter for citation-network bundles distributed as eight pickle files:
 *
 *   ind.NAME.x / .tx / .allx   CSR float32 feature blocks (train / test / pool)
 *   ind.NAME.y / .ty / .ally   one-hot label arrays aligned with the blocks
 *   ind.NAME.graph             adjacency dict {node: [neighbors]}
 *   ind.NAME.test.index        node ids of the test rows, one per line
 *
 * Node numbering: the pool block covers ids [0, allx_rows); test rows live at
 * the ids listed in test.index. Ids inside the test range that are missing
 * from test.index (isolated pages in some releases) become zero-feature,
 * unlabeled nodes. The fixed split is train = the first x_rows pool nodes,
 * validation = the next 500, test = the sorted test ids.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { CsrMatrix, NDArray, loads } from "./pickle.js";
import {
	Dataset,
	Manifest,
	canonicalizeEdges,
	checksumFiles,
	writeDataset,
} from "./formats.js";

const SUFFIXES = ["x", "y", "tx", "ty", "allx", "ally", "graph", "test.index"];

export function convertPlanetoid(
	srcDir: string,
	name: string,
	outDir: string,
): Manifest {
	const fileNames = SUFFIXES.map((s) => `ind.${name}.${s}`);
	for (const f of fileNames) {
		if (!fs.existsSync(path.join(srcDir, f))) {
			throw new Error(`missing source file ${f} in ${srcDir}`);
		}
	}
	const read = (suffix: string) =>
		fs.readFileSync(path.join(srcDir, `ind.${name}.${suffix}`));

	const x = loads(read("x")) as CsrMatrix;
	const tx = loads(read("tx")) as CsrMatrix;
	const allx = loads(read("allx")) as CsrMatrix;
	const y = loads(read("y")) as NDArray;
	const ty = loads(read("ty")) as NDArray;
	const ally = loads(read("ally")) as NDArray;
	const graph = loads(read("graph")) as Map<number, number[]>;
	const testIndex = read("test.index")
		.toString("utf8")
		.split("\n")
		.filter((l) => l.trim().length > 0)
		.map((l) => parseInt(l, 10));

	const d = allx.cols;
	if (tx.cols !== d || x.cols !== d) {
		throw new Error(`feature widths disagree: ${x.cols}/${tx.cols}/${allx.cols}`);
	}
	if (tx.rows !== testIndex.length) {
		throw new Error(
			`test block has ${tx.rows} rows but test.index lists ${testIndex.length}`,
		);
	}
	const poolRows = allx.rows;
	const sortedTest = [...testIndex].sort((a, b) => a - b);
	if (sortedTest[0] < poolRows) {
		throw new Error("test ids overlap the pool block");
	}
	const numNodes = Math.max(sortedTest[sortedTest.length - 1] + 1, graph.size);

	// Features: pool block at ids [0, poolRows), test rows at their listed ids,
	// gaps stay zero.
	const features = new Float32Array(numNodes * d);
	features.set(Float32Array.from(allx.toDense()), 0);
	const txDense = tx.toDense();
	testIndex.forEach((node, k) => {
		features.set(Float32Array.from(txDense.subarray(k * d, (k + 1) * d)), node * d);
	});

	// Labels from one-hot rows; all-zero rows mean unlabeled.
	const labels = new Array<number>(numNodes).fill(-1);
	const assign = (oneHot: NDArray, nodeOf: (row: number) => number) => {
		const vals = oneHot.toNumbers();
		const classes = oneHot.shape[1];
		for (let r = 0; r < oneHot.shape[0]; r++) {
			for (let c = 0; c < classes; c++) {
				if (vals[r * classes + c] !== 0) {
					labels[nodeOf(r)] = c;
					break;
				}
			}
		}
		return classes;
	};
	const numClasses = assign(ally, (r) => r);
	assign(ty, (r) => testIndex[r]);

	const rawEdges: Array<[number, number]> = [];
	for (const [u, nbrs] of graph) {
		for (const v of nbrs) rawEdges.push([u as number, v as number]);
	}
	const { edges, cleanup } = canonicalizeEdges(rawEdges);

	const trainSize = y.shape[0];
	const splits = [
		{
			train: range(0, trainSize),
			val: range(trainSize, Math.min(trainSize + 500, poolRows)),
			test: sortedTest,
		},
	];

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
		format: "planetoid",
		sourceChecksums: checksumFiles(srcDir, fileNames),
		splitsSource: "fixed",
		cleanup,
	});
}

function range(lo: number, hi: number): number[] {
	return Array.from({ length: hi - lo }, (_, i) => lo + i);
}
