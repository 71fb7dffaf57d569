import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { describe, expect, it } from "vitest";

import { convertPlanetoid } from "../src/planetoid.js";
import { CsrMatrix, loads } from "../src/pickle.js";

const FIX = path.join(__dirname, "fixtures", "planetoid");
const expected = JSON.parse(
	fs.readFileSync(path.join(FIX, "expected.json"), "utf8"),
);

function tmpDir(): string {
	return fs.mkdtempSync(path.join(os.tmpdir(), "planetoid-"));
}

describe("planetoid conversion", () => {
	it("emits the expected counts and manifest echo", () => {
		const out = tmpDir();
		const manifest = convertPlanetoid(FIX, "toyplanetoid", out);
		expect(manifest.num_nodes).toBe(expected.num_nodes);
		expect(manifest.num_features).toBe(expected.num_features);
		expect(manifest.num_classes).toBe(expected.num_classes);
		expect(manifest.num_edges).toBe(expected.edges);
		expect(manifest.self_loops_removed).toBeGreaterThan(0);
		const meta = JSON.parse(fs.readFileSync(path.join(out, "meta.json"), "utf8"));
		expect(meta).toEqual({
			name: "toyplanetoid",
			num_nodes: expected.num_nodes,
			num_features: expected.num_features,
			num_classes: expected.num_classes,
		});
	});

	it("lays out the fixed split and resolves the test-index gap", () => {
		const out = tmpDir();
		convertPlanetoid(FIX, "toyplanetoid", out);
		const splits = JSON.parse(
			fs.readFileSync(path.join(out, "splits.json"), "utf8"),
		);
		expect(splits).toHaveLength(1);
		expect(splits[0].train).toEqual([0, 1, 2, 3, 4, 5]);
		expect(splits[0].val).toEqual([6, 7, 8, 9, 10, 11, 12, 13]);
		expect(splits[0].test).toEqual([14, 15, 17, 18, 19]); // 16 is the gap

		const labels = new Map<number, number>();
		for (const line of fs
			.readFileSync(path.join(out, "labels.tsv"), "utf8")
			.split("\n")
			.filter(Boolean)) {
			const [node, cls] = line.split("\t").map(Number);
			labels.set(node, cls);
		}
		expect(labels.has(16)).toBe(false); // gap node is unlabeled
		for (const [node, cls] of labels) {
			expect(cls).toBe(expected.labels[node]);
		}
	});

	it("keeps feature bytes bit-identical to the source blocks", () => {
		const out = tmpDir();
		convertPlanetoid(FIX, "toyplanetoid", out);
		const emitted = fs.readFileSync(path.join(out, "features.bin"));
		const allx = loads(
			fs.readFileSync(path.join(FIX, "ind.toyplanetoid.allx")),
		) as CsrMatrix;
		const poolBytes = Buffer.from(
			Float32Array.from(allx.toDense()).buffer,
		);
		expect(emitted.subarray(0, poolBytes.length).equals(poolBytes)).toBe(true);
		// The gap row (node 16) is all zeros.
		const d = expected.num_features;
		const gap = emitted.subarray(16 * d * 4, 17 * d * 4);
		expect(gap.every((b: number) => b === 0)).toBe(true);
	});

	it("emits each undirected edge once, canonically ordered", () => {
		const out = tmpDir();
		convertPlanetoid(FIX, "toyplanetoid", out);
		const lines = fs
			.readFileSync(path.join(out, "edges.tsv"), "utf8")
			.split("\n")
			.filter(Boolean);
		expect(lines.length).toBe(expected.edges);
		const seen = new Set<string>();
		for (const line of lines) {
			const [u, v] = line.split("\t").map(Number);
			expect(u).toBeLessThan(v);
			expect(seen.has(`${u},${v}`)).toBe(false);
			seen.add(`${u},${v}`);
		}
	});

	it("is byte-idempotent across repeated conversions", () => {
		const a = tmpDir();
		const b = tmpDir();
		convertPlanetoid(FIX, "toyplanetoid", a);
		convertPlanetoid(FIX, "toyplanetoid", b);
		for (const name of fs.readdirSync(a).sort()) {
			const bytesA = fs.readFileSync(path.join(a, name));
			const bytesB = fs.readFileSync(path.join(b, name));
			expect(bytesA.equals(bytesB), name).toBe(true);
		}
	});

	it("rejects incomplete bundles", () => {
		const partial = tmpDir();
		for (const f of fs.readdirSync(FIX)) {
			if (!f.endsWith(".graph") && f.startsWith("ind.")) {
				fs.copyFileSync(path.join(FIX, f), path.join(partial, f));
			}
		}
		expect(() => convertPlanetoid(partial, "toyplanetoid", tmpDir())).toThrow(
			/missing source file/,
		);
	});
});
