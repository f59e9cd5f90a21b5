#!/usr/bin/env node
import { writeFileSync } from 'fs'
import yargs from 'yargs'
import { hideBin } from 'yargs/helpers'
import { CsvError } from './csv.js'
import { buildFigure, type FigureKind } from './plots.js'

export async function main(argv: string[]): Promise<number> {
  const args = await yargs(argv)
    .command('$0 <kind>', 'render a figure from simulator CSV output', (y) =>
      y.positional('kind', {
        describe: 'figure kind',
        choices: ['trajectory', 'sweep', 'thermal'] as const,
        demandOption: true,
      })
    )
    .option('in', {
      type: 'string',
      array: true,
      demandOption: true,
      describe: 'input CSV path(s); repeat to overlay curves',
    })
    .option('out', {
      type: 'string',
      demandOption: true,
      describe: 'output SVG path',
    })
    .option('closure', {
      type: 'number',
      array: true,
      default: [] as number[],
      describe: 'loop-closure time(s) to mark on the time axis (ns)',
    })
    .option('x', { type: 'string', describe: 'x column for sweep figures' })
    .option('title', { type: 'string', describe: 'figure title override' })
    .strict()
    .fail((msg, err) => {
      throw err ?? new Error(msg)
    })
    .parse()

  try {
    const svg = buildFigure({
      kind: args.kind as FigureKind,
      inputs: args.in as string[],
      closures: args.closure as number[],
      xColumn: args.x,
      title: args.title,
    })
    writeFileSync(args.out as string, svg, 'utf8')
    console.log(`wrote ${args.out}`)
    return 0
  } catch (err) {
    if (err instanceof CsvError) {
      console.error(`figure error: ${err.message}`)
      return 1
    }
    throw err
  }
}

const invokedDirectly = process.argv[1] !== undefined &&
  import.meta.url.endsWith(process.argv[1].split('/').pop() ?? '!')
if (invokedDirectly) {
  main(hideBin(process.argv)).then(
    (code) => process.exit(code),
    (err) => {
      console.error(err instanceof Error ? err.message : String(err))
      process.exit(2)
    }
  )
}
