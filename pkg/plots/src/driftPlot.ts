// Invariant-drift timelines from a guard series CSV (columns t,
// min_component, mass_rel_drift): the minimum state component on a linear
// axis and the relative mass drift on a log axis, stacked panels.

import { parseCsv, numericColumn } from "./csv.js";
import { Svg, linearScale, linearTicks, logScale, logTicks } from "./svg.js";

export function driftPlot(csvText: string): string {
    const table = parseCsv(csvText);
    const t = numericColumn(table, "t").values;
    const minComp = numericColumn(table, "min_component").values;
    const drift = numericColumn(table, "mass_rel_drift").values;
    if (t.length === 0) {
        throw new Error("guard series is empty");
    }

    const W = 560, H = 440, L = 78, R = 25;
    const panels = [
        { top: 35, bottom: 210 },
        { top: 255, bottom: 415 },
    ];
    const svg = new Svg(W, H);
    const x = linearScale(t[0], t[t.length - 1] || 1, L, W - R);

    // panel 1: minimum component, linear
    {
        const { top, bottom } = panels[0];
        const lo = Math.min(...minComp, 0), hi = Math.max(...minComp);
        const pad = (hi - lo || 1) * 0.08;
        const y = linearScale(lo - pad, hi + pad, bottom, top);
        svg.line(L, top, L, bottom);
        svg.line(L, bottom, W - R, bottom);
        for (const tick of linearTicks(lo - pad, hi + pad, 5)) {
            svg.line(L - 4, y(tick), L, y(tick));
            svg.text(L - 7, y(tick) + 4, tick.toPrecision(3), { anchor: "end", size: 10 });
        }
        if (lo - pad < 0 && hi + pad > 0) {
            svg.line(L, y(0), W - R, y(0), "#bbb", 1, "4,3");
        }
        svg.polyline(t.map((tv, i) => [x(tv), y(minComp[i])] as [number, number]), "#2ca02c");
        svg.text(W / 2, 20, "minimum state component", { anchor: "middle", size: 13 });
    }

    // panel 2: relative mass drift, log (zeros clamped to the axis floor)
    {
        const { top, bottom } = panels[1];
        const positive = drift.filter((d) => d > 0);
        const floor = positive.length ? Math.min(...positive) / 10 : 1e-18;
        const hi = positive.length ? Math.max(...positive) * 10 : 1e-14;
        const y = logScale(floor, hi, bottom, top);
        svg.line(L, top, L, bottom);
        svg.line(L, bottom, W - R, bottom);
        const ticks = logTicks(floor, hi);
        const thin = Math.max(1, Math.floor(ticks.length / 6));
        ticks.filter((_, i) => i % thin === 0).forEach((tick) => {
            svg.line(L - 4, y(tick), L, y(tick));
            svg.text(L - 7, y(tick) + 4, `1e${Math.round(Math.log10(tick))}`,
                { anchor: "end", size: 10 });
        });
        svg.polyline(
            t.map((tv, i) => [x(tv), y(Math.max(drift[i], floor))] as [number, number]),
            "#d62728",
        );
        svg.text(W / 2, 240, "relative total-mass drift", { anchor: "middle", size: 13 });
        for (const tick of linearTicks(t[0], t[t.length - 1] || 1, 6)) {
            svg.line(x(tick), bottom, x(tick), bottom + 4);
            svg.text(x(tick), bottom + 16, tick.toPrecision(3), { anchor: "middle", size: 10 });
        }
        svg.text((L + W - R) / 2, H - 6, "time", { anchor: "middle", size: 12 });
    }
    return svg.render();
}
