/** Parsing for the experiment CSV artifacts (comment block + header + rows). */

export interface Table {
  comments: string[];
  header: string[];
  rows: string[][];
}

export function parseCsv(text: string): Table {
  const comments: string[] = [];
  const data: string[] = [];
  for (const line of text.split(/\r?\n/)) {
    if (line.length === 0) continue;
    if (line.startsWith("#")) {
      comments.push(line);
    } else {
      data.push(line);
    }
  }
  if (data.length === 0) {
    throw new Error("empty CSV: no header row found");
  }
  const header = data[0].split(",");
  const rows = data.slice(1).map((line) => line.split(","));
  return { comments, header, rows };
}

/** Map column names to indices, failing loudly on the first missing one. */
export function columnIndex(table: Table, columns: string[]): Map<string, number> {
  const index = new Map<string, number>();
  for (const name of columns) {
    const at = table.header.indexOf(name);
    if (at < 0) {
      throw new Error(`missing column ${name}`);
    }
    index.set(name, at);
  }
  return index;
}

export function asNumber(raw: string, column: string): number {
  const value = Number(raw);
  if (raw.trim() === "" || Number.isNaN(value)) {
    throw new Error(`bad numeric value ${JSON.stringify(raw)} in column ${column}`);
  }
  return value;
}
