import { ApiError, ConsoleApi, NetworkError } from './api.js';
import {
  buildCompassDoc,
  CardState,
  CreateFormState,
  emptyForm,
  isValidValue,
  parseParameterLines,
  renderCreateForm,
  renderDashboard,
} from './render.js';
import type {
  CampaignState,
  CompassDoc,
  FinalizeResponse,
  InsightsRound,
  ReportResponse,
  Suggestion,
} from './types.js';

export interface ConsoleOptions {
  api: ConsoleApi;
  onRender: (html: string) => void;
  pollIntervalMs?: number;
}

/**
 * Campaign console state machine. Everything shown on screen comes from API
 * payloads held here verbatim; the only client-side state is form text,
 * per-card input text, and transient error banners. Rebuilding this object
 * and calling refresh() reproduces the same view from the API alone.
 */
export class CampaignConsole {
  readonly api: ConsoleApi;
  private readonly onRender: (html: string) => void;
  private readonly pollIntervalMs: number;

  campaignId: string | null = null;
  form: CreateFormState = emptyForm();

  private compass: CompassDoc | null = null;
  private state: CampaignState | null = null;
  private suggestions: Suggestion[] = [];
  private insightRounds: InsightsRound[] = [];
  private report: ReportResponse | null = null;
  private finished: FinalizeResponse | null = null;
  private cards = new Map<string, CardState>();
  private banner: string | null = null;
  private retryAction: (() => Promise<unknown>) | null = null;
  private pollTimer: ReturnType<typeof setInterval> | null = null;

  constructor(options: ConsoleOptions) {
    this.api = options.api;
    this.onRender = options.onRender;
    this.pollIntervalMs = options.pollIntervalMs ?? 5000;
  }

  // -- rendering ---------------------------------------------------------------

  render(): void {
    if (this.campaignId === null || this.state === null) {
      this.onRender(this.renderCreatePage());
      return;
    }
    this.onRender(
      renderDashboard({
        state: this.state,
        suggestions: this.suggestions,
        insightRounds: this.insightRounds,
        report: this.report,
        finished: this.finished,
        cards: this.cards,
        banner: this.banner,
        compass: this.compass,
      }),
    );
  }

  private renderCreatePage(): string {
    const banner = this.banner
      ? `<div class="banner" data-banner="true">${this.banner} ` +
        '<button data-action="retry">retry</button></div>'
      : '';
    return banner + renderCreateForm(this.form);
  }

  // -- create flow -------------------------------------------------------------

  setFormField<K extends keyof CreateFormState>(field: K, value: CreateFormState[K]): void {
    this.form[field] = value;
    this.render();
  }

  /** POST the compass, then pull the first suggestions and show the dashboard. */
  async createCampaign(): Promise<boolean> {
    const structural = parseParameterLines(this.form.parameterLines).errors;
    if (structural.length > 0) {
      this.form.error = structural.join('; ');
      this.render();
      return false;
    }
    const doc = buildCompassDoc(this.form);
    const seed = Number(this.form.seed) || 0;
    const created = await this.guarded(
      () => this.createCampaign(),
      async () => {
        try {
          const reply = await this.api.createCampaign(doc, seed);
          this.campaignId = reply.id;
          this.compass = doc;
          this.form.error = null;
        } catch (err) {
          if (err instanceof ApiError) {
            // 4xx from the API lands inline on the form, field names included
            this.form.error = err.detail;
            this.render();
            return;
          }
          throw err;
        }
      },
    );
    if (!created || this.campaignId === null || this.form.error !== null) {
      return false;
    }
    await this.resync();
    return true;
  }

  // -- result entry flow ---------------------------------------------------------

  /** Update a card's raw input without re-rendering (keystroke path). */
  setInputSilently(trialId: string, raw: string): void {
    const card = this.cards.get(trialId) ?? { input: '', recorded: false };
    card.input = raw;
    this.cards.set(trialId, card);
  }

  setInput(trialId: string, raw: string): void {
    this.setInputSilently(trialId, raw);
    this.render();
  }

  canSubmit(trialId: string): boolean {
    const card = this.cards.get(trialId);
    if (!card || card.recorded) return false;
    return isValidValue(card.input);
  }

  /**
   * Record one result. On the round's last observation the next round is
   * requested immediately and its cards replace the finished ones. A 409
   * marks the card already-recorded and re-syncs from the API instead of
   * adding anything locally.
   */
  async submitResult(trialId: string): Promise<void> {
    if (!this.canSubmit(trialId) || this.campaignId === null) return;
    const id = this.campaignId;
    const value = Number(this.cards.get(trialId)!.input);
    const observed = await this.guarded(
      () => this.submitResult(trialId),
      async () => {
        try {
          await this.api.observe(id, trialId, value);
          this.cards.delete(trialId);
        } catch (err) {
          if (err instanceof ApiError && err.isConflict) {
            // Already on the server (double click, second tab, lost reply).
            // Mark the card, show the marker, then fall through to a plain
            // re-sync; the row the API holds is the only copy ever shown.
            const card = this.cards.get(trialId) ?? { input: '', recorded: false };
            card.recorded = true;
            this.cards.set(trialId, card);
            this.render();
            return;
          }
          throw err;
        }
      },
    );
    if (observed) {
      await this.resync();
    }
  }

  /**
   * Idempotent catch-up: ask for the open round (the API replays it while
   * unfinished trials remain, or advances when the quota is met), then
   * re-read all displayed state. Safe to repeat after any failure.
   */
  private async resync(): Promise<void> {
    const pulled = await this.guarded(
      () => this.resync(),
      async () => {
        await this.pullSuggestions();
      },
    );
    if (!pulled) return;
    await this.guarded(
      () => this.resync(),
      async () => {
        await this.refresh();
      },
    );
  }

  /** Ask the API for the current open round; never invents candidates. */
  private async pullSuggestions(): Promise<void> {
    if (this.campaignId === null) return;
    const response = await this.api.suggest(this.campaignId);
    this.suggestions = response.suggestions;
    for (const s of response.suggestions) {
      if (!this.cards.has(s.trial_id)) {
        this.cards.set(s.trial_id, { input: '', recorded: false });
      }
    }
  }

  // -- shared state pull -----------------------------------------------------------

  /** Re-read everything displayed from the API and re-render. */
  async refresh(): Promise<void> {
    if (this.campaignId === null) {
      this.render();
      return;
    }
    const id = this.campaignId;
    const [state, insights, report] = await Promise.all([
      this.api.getCampaign(id),
      this.api.insights(id),
      this.api.report(id),
    ]);
    this.state = state;
    this.compass = state.compass;
    this.insightRounds = insights.insights;
    this.report = report;
    // Drop cards for trials the API no longer lists as open.
    const open = new Set(state.open);
    for (const trialId of [...this.cards.keys()]) {
      if (!open.has(trialId)) this.cards.delete(trialId);
    }
    this.suggestions = this.suggestions.filter((s) => open.has(s.trial_id));
    this.render();
  }

  /** Attach to an existing campaign (page reload path). */
  async attach(campaignId: string): Promise<void> {
    this.campaignId = campaignId;
    await this.resync();
  }

  async finalizeCampaign(): Promise<void> {
    if (this.campaignId === null) return;
    const id = this.campaignId;
    await this.guarded(
      () => this.finalizeCampaign(),
      async () => {
        try {
          this.finished = await this.api.finalize(id);
        } catch (err) {
          if (err instanceof ApiError && err.isConflict) {
            this.banner = err.detail;
            this.render();
            return;
          }
          throw err;
        }
        await this.refresh();
      },
    );
  }

  // -- connectivity ------------------------------------------------------------------

  /**
   * Run an action; a transport failure raises the retry banner and remembers
   * the action, leaving all held state (form text, inputs, payloads) intact.
   */
  private async guarded(retry: () => Promise<unknown>, action: () => Promise<void>): Promise<boolean> {
    try {
      await action();
      this.banner = null;
      this.retryAction = null;
      return true;
    } catch (err) {
      if (err instanceof NetworkError) {
        this.banner = 'network problem, nothing was lost';
        this.retryAction = retry;
        this.render();
        return false;
      }
      throw err;
    }
  }

  async retry(): Promise<void> {
    const action = this.retryAction;
    this.retryAction = null;
    this.banner = null;
    if (action) await action();
  }

  startPolling(): void {
    if (this.pollTimer !== null) return;
    this.pollTimer = setInterval(() => {
      if (this.campaignId !== null) {
        void this.refresh().catch(() => {
          this.banner = 'network problem, nothing was lost';
          this.render();
        });
      }
    }, this.pollIntervalMs);
  }

  stopPolling(): void {
    if (this.pollTimer !== null) {
      clearInterval(this.pollTimer);
      this.pollTimer = null;
    }
  }
}
