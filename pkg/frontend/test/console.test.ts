import { afterEach, describe, expect, it, vi } from 'vitest';

import { ConsoleApi } from '../src/api.js';
import { CampaignConsole } from '../src/console.js';
import { MockService } from './mockApi.js';

function makeConsole(mock: MockService, pollIntervalMs?: number) {
  const renders: string[] = [];
  const api = new ConsoleApi('http://mock', mock.fetch);
  const console_ = new CampaignConsole({
    api,
    onRender: (html) => renders.push(html),
    ...(pollIntervalMs === undefined ? {} : { pollIntervalMs }),
  });
  return { console_, api, renders, last: () => renders[renders.length - 1] ?? '' };
}

function fillForm(console_: CampaignConsole, overrides: Partial<Record<string, string>> = {}) {
  console_.form.title = overrides.title ?? 'Coupling screen';
  console_.form.description = 'base and temperature sweep';
  console_.form.objectiveName = 'yield';
  console_.form.direction = 'maximize';
  console_.form.rounds = overrides.rounds ?? '3';
  console_.form.candidatesPerRound = overrides.candidatesPerRound ?? '3';
  console_.form.poolSize = '5';
  console_.form.parameterLines =
    overrides.parameterLines ??
    ['temperature continuous 20 100 C', 'base categorical CsF,K3PO4,KOtBu'].join('\n');
  console_.form.seed = '7';
}

async function observeRound(
  console_: CampaignConsole,
  round: number,
  count: number,
  values: number[],
) {
  for (let i = 0; i < count; i++) {
    const trialId = `t${String(round).padStart(3, '0')}-${i}`;
    console_.setInput(trialId, String(values[i]));
    expect(console_.canSubmit(trialId)).toBe(true);
    await console_.submitResult(trialId);
  }
}

afterEach(() => {
  vi.useRealTimers();
});

describe('create flow', () => {
  it('creates a campaign and renders round-0 suggestion cards from the API', async () => {
    const mock = new MockService();
    const { console_, renders, last } = makeConsole(mock);

    console_.render();
    expect(last()).toContain('data-form="create"');

    fillForm(console_);
    const created = await console_.createCampaign();

    expect(created).toBe(true);
    expect(console_.campaignId).toBe('c000001');
    const html = last();
    expect(html).toContain('<section class="suggestions" data-round="0">');
    expect(html).toContain('data-trial="t000-0"');
    expect(html).toContain('data-trial="t000-1"');
    expect(html).toContain('data-trial="t000-2"');
    expect(html).toContain('0/9 observed');
    expect(renders.length).toBeGreaterThan(1);
  });

  it('renders API 422 details inline on the form without losing entered text', async () => {
    const mock = new MockService();
    const { console_, last } = makeConsole(mock);
    fillForm(console_, { parameterLines: 'temperature continuous 50 50 C' });

    const created = await console_.createCampaign();

    expect(created).toBe(false);
    expect(console_.campaignId).toBeNull();
    const html = last();
    expect(html).toContain('data-form-error="true"');
    expect(html).toContain('invalid compass: bounds degenerate: temperature');
    expect(html).toContain('value="Coupling screen"');
  });

  it('reports structural parameter-line problems before any request is made', async () => {
    const mock = new MockService();
    const { console_, last } = makeConsole(mock);
    fillForm(console_, { parameterLines: 'temperature continuous 20' });

    const created = await console_.createCampaign();

    expect(created).toBe(false);
    expect(last()).toContain('two numeric bounds');
    expect(mock.suggested.size).toBe(0);
  });
});

describe('result entry flow', () => {
  it('walks create, suggest, three observations, then renders the next round', async () => {
    const mock = new MockService();
    const { console_, last } = makeConsole(mock);
    fillForm(console_);
    await console_.createCampaign();

    await observeRound(console_, 0, 3, [41.5, 55.0, 62.25]);

    const html = last();
    expect(html).toContain('<section class="suggestions" data-round="1">');
    expect(html).toContain('data-trial="t001-0"');
    expect(html).toContain('data-trial="t001-1"');
    expect(html).toContain('data-trial="t001-2"');
    expect(html).not.toContain('data-trial="t000-0"');
    expect(html).toContain('data-observed="t000-0"');
    expect(html).toContain('data-observed="t000-1"');
    expect(html).toContain('data-observed="t000-2"');
    expect(html).toContain('3/9 observed');
    expect(html).toContain('62.25 (t000-2)');
    // The advance also delivered the first round of insights.
    expect(html).toContain('data-series="h1"');
  });

  it('keeps submit disabled for non-numeric input and never calls the API with it', async () => {
    const mock = new MockService();
    const { console_, last } = makeConsole(mock);
    fillForm(console_);
    await console_.createCampaign();

    console_.setInput('t000-0', 'abc');
    expect(console_.canSubmit('t000-0')).toBe(false);
    expect(last()).toContain('data-submit-for="t000-0" disabled');

    await console_.submitResult('t000-0');
    expect(last()).toContain('no observations yet');

    console_.setInput('t000-0', '41.5');
    expect(console_.canSubmit('t000-0')).toBe(true);
    expect(last()).toContain('data-submit-for="t000-0">');
  });

  it('surfaces a duplicate submit as 409 without duplicating the observation', async () => {
    const mock = new MockService();
    const { console_, api, renders, last } = makeConsole(mock);
    fillForm(console_);
    await console_.createCampaign();

    // A second tab records the same trial first.
    await api.observe('c000001', 't000-0', 41.5);

    console_.setInput('t000-0', '41.5');
    await console_.submitResult('t000-0');

    // The conflict was surfaced on the card before the view converged.
    expect(renders.some((html) => html.includes('data-recorded="true"'))).toBe(true);
    expect(renders.some((html) => html.includes('already recorded'))).toBe(true);

    // Converged view: exactly one history row, no duplicate anywhere.
    const html = last();
    expect(html.match(/data-observed="t000-0"/g)).toHaveLength(1);
    expect(html).toContain('1/9 observed');

    const campaign = (await api.getCampaign('c000001'));
    expect(campaign.n_observed).toBe(1);
    expect(campaign.trials.filter((t) => t.id === 't000-0')).toHaveLength(1);
  });
});

describe('hypothesis timeline', () => {
  it('renders the [0.5, 0.8] confidence series as two rising points', async () => {
    const mock = new MockService();
    const { console_, last } = makeConsole(mock);
    fillForm(console_);
    await console_.createCampaign();

    await observeRound(console_, 0, 3, [40, 50, 60]);
    await observeRound(console_, 1, 3, [55, 65, 70]);

    const html = last();
    expect(html).toContain('<polyline data-series="h1"');
    const low = html.match(/data-confidence="0\.5" cx="[\d.]+" cy="([\d.]+)"/);
    const high = html.match(/data-confidence="0\.8" cx="[\d.]+" cy="([\d.]+)"/);
    expect(low).not.toBeNull();
    expect(high).not.toBeNull();
    expect(Number(high![1])).toBeLessThan(Number(low![1]));
    expect(html).toContain('[0.50, 0.80]');
    expect(html).toMatch(/data-status="supported"/);
  });

  it('shows the empty state before any insights arrive', async () => {
    const mock = new MockService();
    const { console_, last } = makeConsole(mock);
    fillForm(console_);
    await console_.createCampaign();

    expect(last()).toContain('data-empty-timeline="true"');
  });
});

describe('network failures', () => {
  it('raises a retry banner on create without losing form state, then retries', async () => {
    const mock = new MockService();
    const { console_, last } = makeConsole(mock);
    fillForm(console_);

    mock.failNetwork = true;
    const created = await console_.createCampaign();

    expect(created).toBe(false);
    let html = last();
    expect(html).toContain('data-banner="true"');
    expect(html).toContain('network problem, nothing was lost');
    expect(html).toContain('data-action="retry"');
    expect(html).toContain('value="Coupling screen"');

    mock.failNetwork = false;
    await console_.retry();

    html = last();
    expect(html).not.toContain('data-banner="true"');
    expect(html).toContain('data-trial="t000-0"');
  });

  it('keeps typed inputs when an observation submit hits a dead network', async () => {
    const mock = new MockService();
    const { console_, last } = makeConsole(mock);
    fillForm(console_);
    await console_.createCampaign();

    console_.setInput('t000-0', '41.5');
    console_.setInput('t000-1', '33');
    mock.failNetwork = true;
    await console_.submitResult('t000-0');

    let html = last();
    expect(html).toContain('data-banner="true"');
    expect(html).toContain('value="41.5"');
    expect(html).toContain('value="33"');
    expect(html).toContain('no observations yet');

    mock.failNetwork = false;
    await console_.retry();

    html = last();
    expect(html).not.toContain('data-banner="true"');
    expect(html).toContain('data-observed="t000-0"');
    expect(html).toContain('value="33"');
  });
});

describe('statelessness', () => {
  it('reproduces the exact view from API state alone on reattach', async () => {
    const mock = new MockService();
    const { console_, last } = makeConsole(mock);
    fillForm(console_);
    await console_.createCampaign();
    await observeRound(console_, 0, 3, [40, 50, 60]);
    const before = last();

    const fresh = makeConsole(mock);
    await fresh.console_.attach('c000001');

    expect(fresh.last()).toBe(before);
  });
});

describe('API-origin invariant', () => {
  it('only ever shows trial ids that came from suggest responses', async () => {
    const mock = new MockService();
    const { console_, renders } = makeConsole(mock);
    fillForm(console_, { rounds: '2', candidatesPerRound: '2' });
    await console_.createCampaign();
    await observeRound(console_, 0, 2, [40, 50]);
    await observeRound(console_, 1, 2, [60, 70]);

    const shown = new Set<string>();
    for (const html of renders) {
      for (const m of html.matchAll(/data-(?:trial|observed|input-for|submit-for)="([^"]+)"/g)) {
        shown.add(m[1]!);
      }
    }
    expect(shown.size).toBeGreaterThan(0);
    for (const trialId of shown) {
      expect(mock.suggested.has(trialId)).toBe(true);
    }
  });
});

describe('finalize flow', () => {
  it('refuses to finalize while suggestions are open, then renders the summary', async () => {
    const mock = new MockService();
    const { console_, last } = makeConsole(mock);
    fillForm(console_, { rounds: '2', candidatesPerRound: '2' });
    await console_.createCampaign();

    await console_.finalizeCampaign();
    expect(last()).toContain('open suggestions pending; observe them first');
    expect(last()).not.toContain('data-finished="true"');

    await observeRound(console_, 0, 2, [40, 50]);
    await observeRound(console_, 1, 2, [60, 70]);

    await console_.finalizeCampaign();
    const html = last();
    expect(html).toContain('data-finished="true"');
    expect(html).toContain('1. Key outcomes: campaign complete.');
    expect(html).toContain('best observed value 70');
  });
});

describe('polling', () => {
  it('picks up observations made elsewhere on the poll interval', async () => {
    vi.useFakeTimers();
    const mock = new MockService();
    const { console_, api, last } = makeConsole(mock, 1000);
    fillForm(console_);
    await console_.createCampaign();
    expect(last()).toContain('no observations yet');

    await api.observe('c000001', 't000-1', 48);
    console_.startPolling();
    await vi.advanceTimersByTimeAsync(1100);
    console_.stopPolling();

    expect(last()).toContain('data-observed="t000-1"');
  });
});
