import { readFileSync } from 'fs'
import Papa from 'papaparse'

export interface Table {
  path: string
  columns: string[]
  rows: Record<string, number | null>[]
}

export class CsvError extends Error {}

/** Parse one of the simulator's CSV outputs (RFC-4180, LF, header row). */
export function readCsv(path: string): Table {
  let text: string
  try {
    text = readFileSync(path, 'utf8')
  } catch (err) {
    throw new CsvError(`cannot read ${path}: ${(err as Error).message}`)
  }
  const parsed = Papa.parse<Record<string, string>>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  })
  if (parsed.errors.length > 0) {
    const first = parsed.errors[0]
    throw new CsvError(`${path}: ${first.message} (row ${first.row})`)
  }
  const columns = parsed.meta.fields ?? []
  if (columns.length === 0 || parsed.data.length === 0) {
    throw new CsvError(`${path}: no data rows`)
  }
  const rows = parsed.data.map((raw) => {
    const out: Record<string, number | null> = {}
    for (const col of columns) {
      const cell = raw[col]
      if (cell === undefined || cell === '') {
        out[col] = null
      } else {
        const value = Number(cell)
        if (!Number.isFinite(value)) {
          throw new CsvError(`${path}: non-numeric cell '${cell}' in column ${col}`)
        }
        out[col] = value
      }
    }
    return out
  })
  return { path, columns, rows }
}

export function requireColumns(table: Table, needed: string[]): void {
  for (const col of needed) {
    if (!table.columns.includes(col)) {
      throw new CsvError(`${table.path}: missing required column '${col}' (has: ${table.columns.join(', ')})`)
    }
  }
}

/** Non-null numeric values of one column. */
export function columnValues(table: Table, col: string): number[] {
  return table.rows.map((r) => r[col]).filter((v): v is number => v !== null)
}
