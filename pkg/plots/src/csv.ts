// Minimal CSV reading for the comma-separated, header-row files the
// integrator writes. No quoting or escaping: the producers never emit it.

export interface Table {
    columns: string[];
    rows: string[][];
}

export function parseCsv(text: string): Table {
    const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
    if (lines.length < 1) {
        throw new Error("empty CSV: no header row");
    }
    const columns = lines[0].split(",");
    const rows = lines.slice(1).map((line, i) => {
        const cells = line.split(",");
        if (cells.length !== columns.length) {
            throw new Error(`CSV row ${i + 2} has ${cells.length} cells, expected ${columns.length}`);
        }
        return cells;
    });
    return { columns, rows };
}

export function columnIndex(table: Table, name: string): number {
    const idx = table.columns.indexOf(name);
    if (idx < 0) {
        throw new Error(`missing column "${name}" (found: ${table.columns.join(", ")})`);
    }
    return idx;
}

// Numeric column with sentinel-aware filtering: rows whose cell is empty or
// matches one of the allowed sentinels are skipped; anything else that does
// not parse to a finite number (including NaN) is an error, so a corrupted
// input never produces a partial figure.
export function numericColumn(
    table: Table,
    name: string,
    sentinels: string[] = [],
): { values: number[]; kept: number[] } {
    const idx = columnIndex(table, name);
    const values: number[] = [];
    const kept: number[] = [];
    table.rows.forEach((row, i) => {
        const cell = row[idx];
        if (cell === "" || sentinels.includes(cell)) {
            return;
        }
        const v = Number(cell);
        if (!Number.isFinite(v)) {
            throw new Error(`column "${name}" row ${i + 2}: "${cell}" is not a finite number`);
        }
        values.push(v);
        kept.push(i);
    });
    return { values, kept };
}
