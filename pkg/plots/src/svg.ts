// Hand-rolled SVG scene building: enough axes, polylines and rectangles for
// the three figure kinds, with log/linear scales. No DOM, just strings.

export type Scale = (v: number) => number;

export function linearScale(d0: number, d1: number, r0: number, r1: number): Scale {
    const span = d1 - d0 || 1;
    return (v) => r0 + ((v - d0) / span) * (r1 - r0);
}

export function logScale(d0: number, d1: number, r0: number, r1: number): Scale {
    if (d0 <= 0 || d1 <= 0) {
        throw new Error("log scale requires positive domain");
    }
    const l0 = Math.log10(d0);
    const span = Math.log10(d1) - l0 || 1;
    return (v) => r0 + ((Math.log10(v) - l0) / span) * (r1 - r0);
}

export function logTicks(d0: number, d1: number): number[] {
    const ticks: number[] = [];
    for (let e = Math.ceil(Math.log10(d0) - 1e-9); e <= Math.floor(Math.log10(d1) + 1e-9); e++) {
        ticks.push(10 ** e);
    }
    return ticks;
}

export function linearTicks(d0: number, d1: number, count = 6): number[] {
    const rawStep = (d1 - d0) / Math.max(count - 1, 1);
    const mag = 10 ** Math.floor(Math.log10(Math.abs(rawStep) || 1));
    const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => (d1 - d0) / s <= count) ?? mag * 10;
    const ticks: number[] = [];
    for (let v = Math.ceil(d0 / step) * step; v <= d1 + 1e-12 * Math.abs(step); v += step) {
        ticks.push(Number(v.toPrecision(12)));
    }
    return ticks;
}

const esc = (s: string) => s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");

export class Svg {
    private parts: string[] = [];

    constructor(readonly width: number, readonly height: number) {}

    line(x1: number, y1: number, x2: number, y2: number, stroke = "#444", widthPx = 1, dash = "") {
        const d = dash ? ` stroke-dasharray="${dash}"` : "";
        this.parts.push(
            `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" stroke="${stroke}" stroke-width="${widthPx}"${d}/>`,
        );
    }

    polyline(points: Array<[number, number]>, stroke: string, widthPx = 1.5) {
        const pts = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
        this.parts.push(
            `<polyline points="${pts}" fill="none" stroke="${stroke}" stroke-width="${widthPx}"/>`,
        );
    }

    circle(x: number, y: number, r: number, fill: string) {
        this.parts.push(`<circle cx="${fmt(x)}" cy="${fmt(y)}" r="${r}" fill="${fill}"/>`);
    }

    rect(x: number, y: number, w: number, h: number, fill: string) {
        this.parts.push(
            `<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(w)}" height="${fmt(h)}" fill="${fill}"/>`,
        );
    }

    text(x: number, y: number, content: string, opts: { size?: number; anchor?: string; rotate?: boolean } = {}) {
        const size = opts.size ?? 11;
        const anchor = opts.anchor ?? "start";
        const transform = opts.rotate ? ` transform="rotate(-90 ${fmt(x)} ${fmt(y)})"` : "";
        this.parts.push(
            `<text x="${fmt(x)}" y="${fmt(y)}" font-size="${size}" font-family="sans-serif" text-anchor="${anchor}"${transform}>${esc(content)}</text>`,
        );
    }

    render(): string {
        return (
            `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" height="${this.height}" ` +
            `viewBox="0 0 ${this.width} ${this.height}">\n<rect width="100%" height="100%" fill="white"/>\n` +
            this.parts.join("\n") +
            "\n</svg>\n"
        );
    }
}

function fmt(v: number): string {
    return Number(v.toFixed(2)).toString();
}

// small diverging-free sequential colormap (dark blue -> green -> yellow)
const STOPS: Array<[number, number, number]> = [
    [68, 1, 84],
    [59, 82, 139],
    [33, 145, 140],
    [94, 201, 98],
    [253, 231, 37],
];

export function colormap(t: number): string {
    const x = Math.min(Math.max(t, 0), 1) * (STOPS.length - 1);
    const i = Math.min(Math.floor(x), STOPS.length - 2);
    const f = x - i;
    const c = STOPS[i].map((a, k) => Math.round(a + f * (STOPS[i + 1][k] - a)));
    return `rgb(${c[0]},${c[1]},${c[2]})`;
}
