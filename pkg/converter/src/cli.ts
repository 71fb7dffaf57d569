/** CLI: convert --format {planetoid|webgraph} --name NAME --src DIR --out DIR */

import { pathToFileURL } from "node:url";

import { convertPlanetoid } from "./planetoid.js";
import { convertWebgraph } from "./webgraph.js";

function parseArgs(argv: string[]): Record<string, string> {
	const args: Record<string, string> = {};
	for (let i = 0; i < argv.length; i++) {
		if (argv[i].startsWith("--")) {
			args[argv[i].slice(2)] = argv[i + 1];
			i++;
		} else if (!args.command) {
			args.command = argv[i];
		}
	}
	return args;
}

export function main(argv: string[]): number {
	const args = parseArgs(argv);
	if (args.command !== "convert") {
		console.error(
			"usage: convert --format {planetoid|webgraph} --name NAME --src DIR --out DIR",
		);
		return 2;
	}
	for (const key of ["format", "name", "src", "out"]) {
		if (!args[key]) {
			console.error(`missing --${key}`);
			return 2;
		}
	}
	const convert =
		args.format === "planetoid"
			? convertPlanetoid
			: args.format === "webgraph"
				? convertWebgraph
				: null;
	if (!convert) {
		console.error(`unknown format ${args.format}`);
		return 2;
	}
	const manifest = convert(args.src, args.name, args.out);
	console.log(JSON.stringify(manifest, null, 2));
	return 0;
}

if (
	process.argv[1] &&
	import.meta.url === pathToFileURL(process.argv[1]).href
) {
	process.exit(main(process.argv.slice(2)));
}
