import { basename } from 'path'
import { CsvError, columnValues, readCsv, requireColumns, type Table } from './csv.js'
import {
  makeScales,
  renderAxes,
  renderBars,
  renderLegend,
  renderSeries,
  renderVerticalMarkers,
  svgDocument,
  type Series,
} from './svg.js'

export type FigureKind = 'trajectory' | 'sweep' | 'thermal'

export interface FigureSpec {
  kind: FigureKind
  inputs: string[]
  /** x column for sweep figures (defaults to the first CSV column) */
  xColumn?: string
  /** vertical marker positions on the time axis (loop-closure times, ns) */
  closures?: number[]
  title?: string
}

function seriesLabel(path: string): string {
  return basename(path).replace(/\.csv$/i, '')
}

/** Fidelity vs time; one curve per input file, closure times marked. */
export function buildTrajectoryFigure(spec: FigureSpec): string {
  const series: Series[] = spec.inputs.map((path) => {
    const table = readCsv(path)
    requireColumns(table, ['t_ns', 'fidelity'])
    const points = table.rows
      .filter((r) => r.fidelity !== null)
      .map((r) => [r.t_ns as number, r.fidelity as number] as [number, number])
    if (points.length === 0) {
      throw new CsvError(`${path}: fidelity column has no values`)
    }
    return { label: seriesLabel(path), points }
  })
  const axes = {
    xLabel: 'time (ns)',
    yLabel: 'fidelity',
    title: spec.title ?? 'entangled-state fidelity vs time',
    yDomain: [0, 1] as [number, number],
  }
  const { x, y } = makeScales(series, axes)
  const body = [
    renderAxes(x, y, axes),
    renderSeries(series, x, y),
    renderVerticalMarkers(spec.closures ?? [], x, 'closure'),
    renderLegend(series),
  ].join('\n')
  return svgDocument(body)
}

function sweepSeries(table: Table, xCol: string): Series {
  requireColumns(table, [xCol, 'final_infidelity'])
  const points = table.rows
    .filter((r) => r[xCol] !== null && r.final_infidelity !== null)
    .map((r) => [r[xCol] as number, r.final_infidelity as number] as [number, number])
  if (points.length === 0) {
    throw new CsvError(`${table.path}: no usable sweep rows`)
  }
  return { label: seriesLabel(table.path), points }
}

/** Final infidelity vs the swept parameter on a log scale. */
export function buildSweepFigure(spec: FigureSpec): string {
  const tables = spec.inputs.map(readCsv)
  const xCol = spec.xColumn ?? tables[0].columns[0]
  const series = tables.map((t) => sweepSeries(t, xCol))
  const axes = {
    xLabel: xCol,
    yLabel: 'final infidelity',
    title: spec.title ?? `infidelity vs ${xCol}`,
    logY: true,
  }
  const { x, y } = makeScales(series, axes)
  const body = [
    renderAxes(x, y, axes),
    renderSeries(series, x, y, true),
    renderLegend(series),
  ].join('\n')
  return svgDocument(body)
}

/** Final fidelity vs thermal occupation as bars (flat when insensitive). */
export function buildThermalFigure(spec: FigureSpec): string {
  const table = readCsv(spec.inputs[0])
  requireColumns(table, ['n_bar', 'final_fidelity'])
  const points = table.rows
    .filter((r) => r.n_bar !== null && r.final_fidelity !== null)
    .map((r) => [r.n_bar as number, r.final_fidelity as number] as [number, number])
  if (points.length === 0) {
    throw new CsvError(`${table.path}: no usable thermal rows`)
  }
  const fids = points.map((p) => p[1])
  const lo = Math.min(...fids)
  const series: Series[] = [{ label: 'fidelity', points }]
  const axes = {
    xLabel: 'thermal occupation n_bar',
    yLabel: 'final fidelity',
    title: spec.title ?? 'fidelity vs cavity thermal occupation',
    yDomain: [Math.min(0.98, lo - 0.01), 1.0] as [number, number],
  }
  const { x, y } = makeScales(series, axes)
  const body = [
    renderAxes(x, y, axes),
    renderBars(series[0], x, y),
    values(points),
  ].join('\n')
  return svgDocument(body)
}

function values(points: [number, number][]): string {
  return points
    .map(([vx, vy]) => `<!-- n_bar=${vx} fidelity=${vy.toPrecision(10)} -->`)
    .join('\n')
}

export function buildFigure(spec: FigureSpec): string {
  if (spec.inputs.length === 0) {
    throw new CsvError('at least one --in CSV is required')
  }
  switch (spec.kind) {
    case 'trajectory':
      return buildTrajectoryFigure(spec)
    case 'sweep':
      return buildSweepFigure(spec)
    case 'thermal':
      return buildThermalFigure(spec)
  }
}
