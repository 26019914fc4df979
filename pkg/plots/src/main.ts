// CLI: node dist/main.js <order|drift|fields> --in data.csv --out figure.svg
// Reads one CSV produced by the integrator, writes one SVG. Any input
// problem (missing column, NaN, bad grid) exits nonzero without writing.

import { readFileSync, writeFileSync } from "node:fs";
import { orderPlot } from "./orderPlot.js";
import { driftPlot } from "./driftPlot.js";
import { fieldHeatmap } from "./fieldHeatmap.js";

const RENDERERS: Record<string, (csv: string) => string> = {
    order: orderPlot,
    drift: driftPlot,
    fields: fieldHeatmap,
};

export function main(argv: string[]): number {
    const [kind, ...rest] = argv;
    if (!kind || !(kind in RENDERERS)) {
        console.error(`usage: plot <order|drift|fields> --in data.csv --out figure.svg`);
        return 2;
    }
    let input = "", output = "";
    for (let i = 0; i < rest.length; i += 2) {
        if (rest[i] === "--in") input = rest[i + 1] ?? "";
        else if (rest[i] === "--out") output = rest[i + 1] ?? "";
        else {
            console.error(`unknown flag ${rest[i]}`);
            return 2;
        }
    }
    if (!input || !output) {
        console.error("--in and --out are both required");
        return 2;
    }
    let csv: string;
    try {
        csv = readFileSync(input, "utf-8");
    } catch (err) {
        console.error(`cannot read ${input}: ${(err as Error).message}`);
        return 2;
    }
    let svg: string;
    try {
        svg = RENDERERS[kind](csv);
    } catch (err) {
        console.error(`cannot render ${kind} figure: ${(err as Error).message}`);
        return 1;
    }
    writeFileSync(output, svg);
    console.log(`wrote ${output} (${svg.length} bytes)`);
    return 0;
}

if (process.argv[1] && process.argv[1].endsWith("main.js")) {
    process.exit(main(process.argv.slice(2)));
}
