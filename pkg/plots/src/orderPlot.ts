// Log-log convergence figure from an order table CSV (columns N, tau,
// error, order). A slope-2 guide line anchored at the coarsest point shows
// the expected decay; "floor"/"failed" rows are skipped for the curve.

import { parseCsv, numericColumn, Table } from "./csv.js";
import { Svg, logScale, logTicks } from "./svg.js";

export function orderPlot(csvText: string): string {
    const table: Table = parseCsv(csvText);
    const taus = numericColumn(table, "tau", ["floor", "failed"]);
    const errs = numericColumn(table, "error", ["floor", "failed"]);
    const keep = errs.kept.filter((r) => taus.kept.includes(r));
    const pts = keep.map((r) => {
        const tau = Number(table.rows[r][table.columns.indexOf("tau")]);
        const err = Number(table.rows[r][table.columns.indexOf("error")]);
        return [tau, err] as [number, number];
    }).filter(([, e]) => e > 0);
    if (pts.length < 1) {
        throw new Error("order table has no plottable rows");
    }
    pts.sort((a, b) => a[0] - b[0]);

    const W = 520, H = 400, L = 70, R = 30, T = 30, B = 55;
    const tMin = pts[0][0], tMax = pts[pts.length - 1][0];
    const eVals = pts.map(([, e]) => e);
    const eMin = Math.min(...eVals), eMax = Math.max(...eVals);
    const x = logScale(tMin / 1.3, tMax * 1.3, L, W - R);
    const y = logScale(eMin / 3, eMax * 3, H - B, T);

    const svg = new Svg(W, H);
    svg.line(L, T, L, H - B);
    svg.line(L, H - B, W - R, H - B);
    for (const t of logTicks(tMin / 1.3, tMax * 1.3)) {
        svg.line(x(t), H - B, x(t), H - B + 4);
        svg.text(x(t), H - B + 18, expLabel(t), { anchor: "middle" });
    }
    for (const e of logTicks(eMin / 3, eMax * 3)) {
        svg.line(L - 4, y(e), L, y(e));
        svg.text(L - 7, y(e) + 4, expLabel(e), { anchor: "end" });
    }
    svg.text((L + W - R) / 2, H - 12, "step size tau", { anchor: "middle", size: 12 });
    svg.text(16, (T + H - B) / 2, "sup error over grid times", {
        anchor: "middle", size: 12, rotate: true,
    });

    // slope-2 guide through the coarsest measured point
    const [t1, e1] = pts[pts.length - 1];
    const guide: Array<[number, number]> = [
        [x(tMin), y(e1 * (tMin / t1) ** 2)],
        [x(t1), y(e1)],
    ];
    svg.polyline(guide, "#999", 1);
    svg.text(x(tMin) + 6, y(e1 * (tMin / t1) ** 2) + 12, "slope 2", { size: 10 });

    svg.polyline(pts.map(([t, e]) => [x(t), y(e)] as [number, number]), "#1f77b4", 1.5);
    for (const [t, e] of pts) {
        svg.circle(x(t), y(e), 3.4, "#1f77b4");
    }
    svg.text(W / 2, 18, "grid-refinement convergence", { anchor: "middle", size: 13 });
    return svg.render();
}

function expLabel(v: number): string {
    const e = Math.round(Math.log10(v));
    return `1e${e}`;
}
