/** Strict reader for the solver's comma-separated artifacts. */

export interface Table {
  header: string[];
  rows: string[][];
}

export function parseCsv(text: string): Table {
  const lines = text.split(/\r?\n/).filter((line) => line.length > 0);
  if (lines.length === 0) throw new Error("malformed CSV: empty file");
  const header = lines[0].split(",");
  const rows = lines.slice(1).map((line, i) => {
    const fields = line.split(",");
    if (fields.length !== header.length) {
      throw new Error(
        `malformed CSV: row ${i + 1} has ${fields.length} fields, expected ${header.length}`,
      );
    }
    return fields;
  });
  return { header, rows };
}

/** Parse one numeric field; the writer spells infinities "inf"/"-inf". */
export function toNumber(field: string, where: string): number {
  if (field === "inf") return Infinity;
  if (field === "-inf") return -Infinity;
  const value = Number(field);
  if (field.trim() === "" || Number.isNaN(value)) {
    throw new Error(`malformed CSV: ${where} is not a number: "${field}"`);
  }
  return value;
}

export function expectHeader(table: Table, expected: string[], what: string): void {
  const got = table.header.join(",");
  if (got !== expected.join(",")) {
    throw new Error(`malformed CSV: ${what} header is "${got}"`);
  }
}
