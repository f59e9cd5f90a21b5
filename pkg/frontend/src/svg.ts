import { scaleLinear, scaleLog, type ScaleContinuousNumeric } from 'd3-scale'
import { line } from 'd3-shape'

export const WIDTH = 720
export const HEIGHT = 460
export const MARGIN = { top: 28, right: 24, bottom: 52, left: 72 }

export const SERIES_COLORS = ['#1f6fb4', '#d1495b', '#3a9d5d', '#8d6cab', '#c07d2b']

const fmt = (v: number): string => {
  if (v === 0) return '0'
  const a = Math.abs(v)
  if (a >= 0.01 && a < 10000) return String(Number(v.toPrecision(6)))
  return v.toExponential(2)
}

const px = (v: number): string => String(Number(v.toFixed(3)))

export interface Series {
  label: string
  points: [number, number][]
}

export interface AxesSpec {
  xLabel: string
  yLabel: string
  title: string
  logY?: boolean
  yDomain?: [number, number]
}

export type Scale = ScaleContinuousNumeric<number, number>

export function makeScales(series: Series[], spec: AxesSpec): { x: Scale; y: Scale } {
  const xs = series.flatMap((s) => s.points.map((p) => p[0]))
  const ys = series.flatMap((s) => s.points.map((p) => p[1]))
  const xMin = Math.min(...xs)
  const xMax = Math.max(...xs)
  const x = scaleLinear()
    .domain([xMin, xMax === xMin ? xMin + 1 : xMax])
    .range([MARGIN.left, WIDTH - MARGIN.right])
  let y: Scale
  if (spec.logY) {
    const positive = ys.filter((v) => v > 0)
    const lo = positive.length ? Math.min(...positive) : 1e-12
    const hi = positive.length ? Math.max(...positive) : 1
    y = scaleLog()
      .domain([lo / 1.5, hi * 1.5])
      .range([HEIGHT - MARGIN.bottom, MARGIN.top])
  } else {
    const [lo, hi] = spec.yDomain ?? [Math.min(...ys), Math.max(...ys)]
    y = scaleLinear()
      .domain([lo, hi === lo ? lo + 1 : hi])
      .range([HEIGHT - MARGIN.bottom, MARGIN.top])
  }
  return { x, y }
}

function axisTicks(scale: Scale, count: number): number[] {
  return scale.ticks(count)
}

export function renderAxes(x: Scale, y: Scale, spec: AxesSpec): string {
  const parts: string[] = []
  const x0 = MARGIN.left
  const x1 = WIDTH - MARGIN.right
  const y0 = HEIGHT - MARGIN.bottom
  const y1 = MARGIN.top
  parts.push(`<rect x="${x0}" y="${y1}" width="${x1 - x0}" height="${y0 - y1}" fill="none" stroke="#444" stroke-width="1"/>`)
  for (const t of axisTicks(x, 8)) {
    const xp = px(x(t))
    parts.push(`<line x1="${xp}" y1="${y0}" x2="${xp}" y2="${y0 + 5}" stroke="#444"/>`)
    parts.push(`<text x="${xp}" y="${y0 + 20}" text-anchor="middle" font-size="12">${fmt(t)}</text>`)
    parts.push(`<line x1="${xp}" y1="${y0}" x2="${xp}" y2="${y1}" stroke="#ddd" stroke-width="0.5"/>`)
  }
  for (const t of axisTicks(y, 7)) {
    const yp = px(y(t))
    parts.push(`<line x1="${x0 - 5}" y1="${yp}" x2="${x0}" y2="${yp}" stroke="#444"/>`)
    parts.push(`<text x="${x0 - 9}" y="${yp}" text-anchor="end" dominant-baseline="middle" font-size="12">${fmt(t)}</text>`)
    parts.push(`<line x1="${x0}" y1="${yp}" x2="${x1}" y2="${yp}" stroke="#ddd" stroke-width="0.5"/>`)
  }
  parts.push(`<text x="${(x0 + x1) / 2}" y="${HEIGHT - 12}" text-anchor="middle" font-size="14">${spec.xLabel}</text>`)
  parts.push(`<text x="18" y="${(y0 + y1) / 2}" text-anchor="middle" font-size="14" transform="rotate(-90 18 ${(y0 + y1) / 2})">${spec.yLabel}</text>`)
  parts.push(`<text x="${(x0 + x1) / 2}" y="18" text-anchor="middle" font-size="15" font-weight="bold">${spec.title}</text>`)
  return parts.join('\n')
}

export function renderSeries(series: Series[], x: Scale, y: Scale, markers = false): string {
  const gen = line<[number, number]>()
    .x((d) => Number(x(d[0]).toFixed(3)))
    .y((d) => Number(y(d[1]).toFixed(3)))
  const parts: string[] = []
  series.forEach((s, i) => {
    const color = SERIES_COLORS[i % SERIES_COLORS.length]
    if (s.points.length === 1 || markers) {
      for (const [vx, vy] of s.points) {
        parts.push(`<circle cx="${px(x(vx))}" cy="${px(y(vy))}" r="3.5" fill="${color}"/>`)
      }
    }
    if (s.points.length > 1) {
      parts.push(`<path d="${gen(s.points) ?? ''}" fill="none" stroke="${color}" stroke-width="1.8"/>`)
    }
  })
  return parts.join('\n')
}

export function renderLegend(series: Series[]): string {
  if (series.length < 2) return ''
  const parts: string[] = [`<g class="legend">`]
  series.forEach((s, i) => {
    const yp = MARGIN.top + 16 + 18 * i
    const color = SERIES_COLORS[i % SERIES_COLORS.length]
    parts.push(`<line x1="${WIDTH - MARGIN.right - 150}" y1="${yp}" x2="${WIDTH - MARGIN.right - 122}" y2="${yp}" stroke="${color}" stroke-width="2"/>`)
    parts.push(`<text x="${WIDTH - MARGIN.right - 114}" y="${yp + 4}" font-size="12">${s.label}</text>`)
  })
  parts.push('</g>')
  return parts.join('\n')
}

export function renderVerticalMarkers(values: number[], x: Scale, label: string): string {
  const y0 = HEIGHT - MARGIN.bottom
  const y1 = MARGIN.top
  return values
    .map((v) => {
      const xp = px(x(v))
      return (
        `<line class="closure-marker" x1="${xp}" y1="${y0}" x2="${xp}" y2="${y1}" ` +
        `stroke="#888" stroke-width="1" stroke-dasharray="5,4"/>\n` +
        `<text x="${xp}" y="${y1 + 12}" text-anchor="middle" font-size="11" fill="#666">${label} ${fmt(v)}</text>`
      )
    })
    .join('\n')
}

export function renderBars(series: Series, x: Scale, y: Scale): string {
  const y0 = HEIGHT - MARGIN.bottom
  const parts: string[] = []
  const n = series.points.length
  const span = (WIDTH - MARGIN.left - MARGIN.right) / Math.max(2 * n, 1)
  for (const [vx, vy] of series.points) {
    const xc = x(vx)
    const yp = y(vy)
    parts.push(
      `<rect class="bar" x="${px(xc - span / 2)}" y="${px(Math.min(yp, y0))}" ` +
      `width="${px(span)}" height="${px(Math.abs(y0 - yp))}" fill="${SERIES_COLORS[0]}" opacity="0.85"/>`
    )
  }
  return parts.join('\n')
}

export function svgDocument(body: string): string {
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" ` +
    `viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="Helvetica, Arial, sans-serif">\n` +
    `<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>\n${body}\n</svg>\n`
  )
}
