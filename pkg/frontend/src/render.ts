// Pure HTML renderers. Every function maps API payloads (plus ephemeral form
// state) to a markup string; nothing here talks to the network or the DOM.

import type {
  CampaignState,
  CompassDoc,
  FinalizeResponse,
  HypothesisView,
  InsightsRound,
  ReportResponse,
  Suggestion,
  TrajectoryEntry,
} from './types.js';

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;')
    .replace(/'/g, '&#39;');
}

/** Submit stays disabled until the raw input parses as a finite number. */
export function isValidValue(raw: string): boolean {
  if (raw.trim() === '') return false;
  const parsed = Number(raw);
  return Number.isFinite(parsed);
}

function pointCells(point: Record<string, string | number>, units: Map<string, string>): string {
  return Object.keys(point)
    .sort()
    .map((name) => {
      const unit = units.get(name);
      const value = escapeHtml(String(point[name]));
      const suffix = unit ? ` <span class="unit">${escapeHtml(unit)}</span>` : '';
      return `<span class="param"><b>${escapeHtml(name)}</b>: ${value}${suffix}</span>`;
    })
    .join(' ');
}

export function unitMap(compass: CompassDoc | null): Map<string, string> {
  const units = new Map<string, string>();
  if (compass) {
    for (const p of compass.parameters) {
      if (p.unit) units.set(p.name, p.unit);
    }
  }
  return units;
}

export interface CardState {
  input: string;
  recorded: boolean; // set after a 409: the API already has this trial
}

export function renderSuggestionCard(
  suggestion: Suggestion,
  objective: string,
  card: CardState,
  units: Map<string, string>,
): string {
  const valid = isValidValue(card.input);
  const disabled = valid && !card.recorded ? '' : ' disabled';
  const recordedNote = card.recorded
    ? '<p class="recorded" data-recorded="true">already recorded</p>'
    : '';
  return [
    `<div class="card" data-trial="${escapeHtml(suggestion.trial_id)}">`,
    `<h4>${escapeHtml(suggestion.trial_id)} <small>${escapeHtml(suggestion.origin)}</small></h4>`,
    `<p>${pointCells(suggestion.point, units)}</p>`,
    `<label>${escapeHtml(objective)} ` +
      `<input data-input-for="${escapeHtml(suggestion.trial_id)}" ` +
      `value="${escapeHtml(card.input)}" inputmode="decimal"></label>`,
    `<button data-submit-for="${escapeHtml(suggestion.trial_id)}"${disabled}>record</button>`,
    recordedNote,
    '</div>',
  ].join('\n');
}

export function renderHistory(state: CampaignState, units: Map<string, string>): string {
  const rows = state.trials
    .filter((t) => t.value !== null)
    .map(
      (t) =>
        `<tr data-observed="${escapeHtml(t.id)}"><td>${escapeHtml(t.id)}</td>` +
        `<td>${t.round}</td><td>${pointCells(t.point, units)}</td>` +
        `<td>${t.value}</td></tr>`,
    );
  if (rows.length === 0) {
    return '<p class="empty">no observations yet</p>';
  }
  return [
    '<table class="history"><thead>',
    `<tr><th>trial</th><th>round</th><th>point</th><th>${escapeHtml(state.objective)}</th></tr>`,
    '</thead><tbody>',
    ...rows,
    '</tbody></table>',
  ].join('\n');
}

// -- hypothesis timeline ------------------------------------------------------

interface Series {
  id: string;
  statement: string;
  status: string; // latest status wins
  points: { round: number; confidence: number }[];
}

export function hypothesisSeries(rounds: InsightsRound[]): Series[] {
  const byId = new Map<string, Series>();
  for (const entry of rounds) {
    if (!entry.insights) continue;
    for (const h of entry.insights.hypotheses) {
      let series = byId.get(h.id);
      if (!series) {
        series = { id: h.id, statement: h.statement, status: h.status, points: [] };
        byId.set(h.id, series);
      }
      series.points.push({ round: entry.round, confidence: h.confidence });
      series.status = h.status;
      if (h.statement) series.statement = h.statement;
    }
  }
  return [...byId.values()];
}

const STATUS_COLORS: Record<string, string> = {
  proposed: '#888888',
  supported: '#2e7d32',
  refuted: '#c62828',
};

const CHART_W = 360;
const CHART_H = 120;
const PAD = 16;

function chartX(round: number, minRound: number, maxRound: number): number {
  const span = Math.max(maxRound - minRound, 1);
  return PAD + ((round - minRound) / span) * (CHART_W - 2 * PAD);
}

function chartY(confidence: number): number {
  return PAD + (1 - confidence) * (CHART_H - 2 * PAD);
}

export function renderHypothesisTimeline(rounds: InsightsRound[]): string {
  const series = hypothesisSeries(rounds);
  if (series.length === 0) {
    return '<p class="empty" data-empty-timeline="true">no hypotheses yet</p>';
  }
  const allRounds = series.flatMap((s) => s.points.map((p) => p.round));
  const minRound = Math.min(...allRounds);
  const maxRound = Math.max(...allRounds);

  const shapes: string[] = [];
  for (const s of series) {
    const color = STATUS_COLORS[s.status] ?? STATUS_COLORS.proposed;
    const coords = s.points
      .map((p) => `${chartX(p.round, minRound, maxRound).toFixed(1)},${chartY(p.confidence).toFixed(1)}`)
      .join(' ');
    shapes.push(
      `<polyline data-series="${escapeHtml(s.id)}" points="${coords}" ` +
        `fill="none" stroke="${color}" stroke-width="2"/>`,
    );
    for (const p of s.points) {
      shapes.push(
        `<circle data-series="${escapeHtml(s.id)}" data-round="${p.round}" ` +
          `data-confidence="${p.confidence}" ` +
          `cx="${chartX(p.round, minRound, maxRound).toFixed(1)}" ` +
          `cy="${chartY(p.confidence).toFixed(1)}" r="3" fill="${color}"/>`,
      );
    }
  }

  const list = series
    .map((s) => renderHypothesisLine(s.id, s.statement, s.points, s.status))
    .join('\n');
  return [
    `<svg class="timeline" viewBox="0 0 ${CHART_W} ${CHART_H}" role="img">`,
    ...shapes,
    '</svg>',
    `<ul class="hypotheses">${list}</ul>`,
  ].join('\n');
}

function renderHypothesisLine(
  id: string,
  statement: string,
  points: { round: number; confidence: number }[],
  status: string,
): string {
  const trail = points.map((p) => p.confidence.toFixed(2)).join(', ');
  const text = `${escapeHtml(id)}: ${escapeHtml(statement)} [${trail}]`;
  const body = status === 'refuted' ? `<s>${text}</s>` : text;
  return `<li data-hypothesis="${escapeHtml(id)}" data-status="${escapeHtml(status)}">${body}</li>`;
}

// -- best-so-far trajectory -----------------------------------------------------

export function renderTrajectory(report: ReportResponse): string {
  const entries: TrajectoryEntry[] = report.trajectory;
  if (entries.length === 0) {
    return '<p class="empty">no trajectory yet</p>';
  }
  const values = entries.map((e) => e.best_so_far);
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const span = hi - lo || 1;
  const coords = entries
    .map((e, i) => {
      const x = PAD + (i / Math.max(entries.length - 1, 1)) * (CHART_W - 2 * PAD);
      const y = PAD + (1 - (e.best_so_far - lo) / span) * (CHART_H - 2 * PAD);
      return `${x.toFixed(1)},${y.toFixed(1)}`;
    })
    .join(' ');
  return [
    `<svg class="trajectory" viewBox="0 0 ${CHART_W} ${CHART_H}" role="img">`,
    `<polyline data-trajectory="best" points="${coords}" fill="none" stroke="#1565c0" stroke-width="2"/>`,
    '</svg>',
    `<p class="caption">best ${escapeHtml(report.objective)} so far over ${entries.length} observations</p>`,
  ].join('\n');
}

// -- page assembly ---------------------------------------------------------------

export interface DashboardModel {
  state: CampaignState;
  suggestions: Suggestion[];
  insightRounds: InsightsRound[];
  report: ReportResponse | null;
  finished: FinalizeResponse | null;
  cards: Map<string, CardState>;
  banner: string | null;
  compass: CompassDoc | null;
}

function renderBanner(banner: string | null): string {
  if (!banner) return '';
  return (
    `<div class="banner" data-banner="true">${escapeHtml(banner)} ` +
    '<button data-action="retry">retry</button></div>'
  );
}

export function renderDashboard(model: DashboardModel): string {
  const { state } = model;
  const units = unitMap(model.compass);
  const best =
    state.best === null
      ? 'none yet'
      : `${state.best.value} (${escapeHtml(state.best.trial_id)})`;
  const cards = model.suggestions
    .map((s) =>
      renderSuggestionCard(
        s,
        state.objective,
        model.cards.get(s.trial_id) ?? { input: '', recorded: false },
        units,
      ),
    )
    .join('\n');
  const finished = model.finished
    ? [
        '<section class="summary" data-finished="true">',
        `<pre>${escapeHtml(model.finished.summary)}</pre>`,
        `<pre>${escapeHtml(model.finished.confidence_table)}</pre>`,
        `<pre>${escapeHtml(model.finished.conclusion)}</pre>`,
        '</section>',
      ].join('\n')
    : '';
  return [
    renderBanner(model.banner),
    `<header><h2>${escapeHtml(state.title)}</h2>`,
    `<p>${escapeHtml(state.objective)} (${escapeHtml(state.direction)}), ` +
      `status <b data-status="${escapeHtml(state.status)}">${escapeHtml(state.status)}</b>, ` +
      `round ${currentRound(state)}, ${state.n_observed}/${state.budget} observed, ` +
      `best: ${best}</p></header>`,
    `<section class="suggestions" data-round="${currentRound(state)}">`,
    cards || '<p class="empty">no open suggestions</p>',
    '</section>',
    '<section class="observations">',
    renderHistory(state, units),
    '</section>',
    '<section class="insights">',
    renderHypothesisTimeline(model.insightRounds),
    '</section>',
    '<section class="report">',
    model.report ? renderTrajectory(model.report) : '',
    '</section>',
    finished,
    model.finished ? '' : '<footer><button data-action="finalize">finalize campaign</button></footer>',
  ].join('\n');
}

function currentRound(state: CampaignState): number {
  let round = 0;
  for (const t of state.trials) {
    if (t.round > round) round = t.round;
  }
  return round;
}

// -- campaign creation form --------------------------------------------------------

export interface CreateFormState {
  title: string;
  description: string;
  objectiveName: string;
  direction: 'maximize' | 'minimize';
  rounds: string;
  candidatesPerRound: string;
  poolSize: string;
  parameterLines: string;
  seed: string;
  error: string | null; // API rejection rendered inline
}

export function emptyForm(): CreateFormState {
  return {
    title: '',
    description: '',
    objectiveName: 'yield',
    direction: 'maximize',
    rounds: '10',
    candidatesPerRound: '3',
    poolSize: '5',
    parameterLines: '',
    seed: '0',
    error: null,
  };
}

/**
 * One parameter per line:
 *   temperature continuous 20 100 [unit]
 *   equivalents discrete-ordinal 1.0,1.5,2.0
 *   base categorical CsF Base,K3PO4 Base
 * Structural problems are reported here; semantic validation is the API's job
 * and its messages come back verbatim on 422.
 */
export function parseParameterLines(
  text: string,
): { parameters: CompassDoc['parameters']; errors: string[] } {
  const parameters: CompassDoc['parameters'] = [];
  const errors: string[] = [];
  for (const rawLine of text.split('\n')) {
    const line = rawLine.trim();
    if (!line) continue;
    const parts = line.split(/\s+/);
    const name = parts[0] ?? '';
    const kind = parts[1] ?? '';
    if (kind === 'continuous') {
      const low = Number(parts[2]);
      const high = Number(parts[3]);
      if (parts.length < 4 || Number.isNaN(low) || Number.isNaN(high)) {
        errors.push(`line "${line}": continuous needs two numeric bounds`);
        continue;
      }
      const unit = parts.slice(4).join(' ') || null;
      parameters.push({ name, kind, bounds: [low, high], unit });
    } else if (kind === 'discrete-ordinal' || kind === 'categorical') {
      const choices = line
        .slice(line.indexOf(kind) + kind.length)
        .split(',')
        .map((c) => c.trim())
        .filter((c) => c.length > 0);
      if (choices.length === 0) {
        errors.push(`line "${line}": ${kind} needs comma-separated choices`);
        continue;
      }
      parameters.push({ name, kind, choices });
    } else {
      errors.push(`line "${line}": kind must be continuous, discrete-ordinal, or categorical`);
    }
  }
  return { parameters, errors };
}

export function buildCompassDoc(form: CreateFormState): CompassDoc {
  const { parameters } = parseParameterLines(form.parameterLines);
  return {
    title: form.title,
    description: form.description,
    objective: { name: form.objectiveName, direction: form.direction },
    parameters,
    budget: {
      rounds: Number(form.rounds),
      candidates_per_round: Number(form.candidatesPerRound),
      bo_pool_size: Number(form.poolSize),
    },
  };
}

export function renderCreateForm(form: CreateFormState): string {
  const error = form.error
    ? `<p class="form-error" data-form-error="true">${escapeHtml(form.error)}</p>`
    : '';
  return [
    '<form data-form="create">',
    `<label>title <input name="title" value="${escapeHtml(form.title)}"></label>`,
    `<label>description <textarea name="description">${escapeHtml(form.description)}</textarea></label>`,
    `<label>objective <input name="objectiveName" value="${escapeHtml(form.objectiveName)}"></label>`,
    '<label>direction <select name="direction">' +
      `<option${form.direction === 'maximize' ? ' selected' : ''}>maximize</option>` +
      `<option${form.direction === 'minimize' ? ' selected' : ''}>minimize</option>` +
      '</select></label>',
    `<label>rounds <input name="rounds" value="${escapeHtml(form.rounds)}"></label>`,
    `<label>per round <input name="candidatesPerRound" value="${escapeHtml(form.candidatesPerRound)}"></label>`,
    `<label>pool size <input name="poolSize" value="${escapeHtml(form.poolSize)}"></label>`,
    `<label>parameters <textarea name="parameterLines">${escapeHtml(form.parameterLines)}</textarea></label>`,
    `<label>seed <input name="seed" value="${escapeHtml(form.seed)}"></label>`,
    error,
    '<button type="submit">create campaign</button>',
    '</form>',
  ].join('\n');
}
