// Three heatmaps (S, I, R) on a shared colour scale from a field snapshot
// CSV with columns x, y, S, I, R at cell centres of a uniform grid.

import { parseCsv, numericColumn } from "./csv.js";
import { Svg, colormap } from "./svg.js";

export function fieldHeatmap(csvText: string): string {
    const table = parseCsv(csvText);
    const xs = numericColumn(table, "x").values;
    const ys = numericColumn(table, "y").values;
    const fields = ["S", "I", "R"].map((name) => numericColumn(table, name).values);
    if (xs.length === 0) {
        throw new Error("field snapshot has no rows");
    }

    const ux = unique(xs), uy = unique(ys);
    const nx = ux.length, ny = uy.length;
    if (nx * ny !== xs.length) {
        throw new Error(`cells do not form a ${nx}x${ny} grid (${xs.length} rows)`);
    }
    const xi = new Map(ux.map((v, i) => [v, i]));
    const yi = new Map(uy.map((v, i) => [v, i]));

    const all = fields.flat();
    const lo = Math.min(...all), hi = Math.max(...all);
    const span = hi - lo || 1;

    const cell = Math.max(4, Math.min(18, Math.floor(240 / Math.max(nx, ny))));
    const panelW = nx * cell, panelH = ny * cell;
    const gap = 34, left = 20, top = 44;
    const W = left + 3 * panelW + 2 * gap + 70;
    const H = top + panelH + 40;
    const svg = new Svg(W, H);

    ["S", "I", "R"].forEach((name, p) => {
        const ox = left + p * (panelW + gap);
        svg.text(ox + panelW / 2, top - 10, name, { anchor: "middle", size: 13 });
        const vals = fields[p];
        for (let r = 0; r < xs.length; r++) {
            const cx = xi.get(xs[r])!;
            const cy = yi.get(ys[r])!;
            svg.rect(ox + cx * cell, top + (ny - 1 - cy) * cell, cell, cell,
                colormap((vals[r] - lo) / span));
        }
    });

    // shared colour bar
    const barX = left + 3 * panelW + 2 * gap + 14, barH = panelH;
    const steps = 40;
    for (let i = 0; i < steps; i++) {
        svg.rect(barX, top + barH - ((i + 1) * barH) / steps, 14, barH / steps + 0.5,
            colormap(i / (steps - 1)));
    }
    svg.text(barX + 18, top + 8, hi.toPrecision(3), { size: 10 });
    svg.text(barX + 18, top + barH, lo.toPrecision(3), { size: 10 });
    svg.text(W / 2, 18, "field snapshot (shared scale)", { anchor: "middle", size: 13 });
    return svg.render();
}

function unique(vals: number[]): number[] {
    return [...new Set(vals)].sort((a, b) => a - b);
}
