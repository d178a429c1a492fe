// Browser entry point. All logic lives in console.ts; this file only wires
// DOM events to controller methods and writes rendered HTML back.

import { ConsoleApi } from './api.js';
import { CampaignConsole } from './console.js';
import type { CreateFormState } from './render.js';

const FORM_FIELDS: (keyof CreateFormState)[] = [
  'title',
  'description',
  'objectiveName',
  'direction',
  'rounds',
  'candidatesPerRound',
  'poolSize',
  'parameterLines',
  'seed',
];

function boot(): void {
  const root = document.getElementById('app');
  if (!root) return;

  const params = new URLSearchParams(window.location.search);
  const baseUrl = params.get('api') ?? window.location.origin;
  const api = new ConsoleApi(baseUrl, (url, init) => fetch(url, init));
  const console_ = new CampaignConsole({
    api,
    onRender: (html) => {
      root.innerHTML = html;
    },
    pollIntervalMs: Number(params.get('poll') ?? '5000'),
  });

  root.addEventListener('input', (event) => {
    const target = event.target as HTMLInputElement | HTMLTextAreaElement;
    const trialId = target.getAttribute('data-input-for');
    if (trialId) {
      // Re-rendering on every keystroke would drop focus; update validity
      // in place and sync controller state without a render.
      console_.setInputSilently(trialId, target.value);
      const button = root.querySelector<HTMLButtonElement>(
        `[data-submit-for="${CSS.escape(trialId)}"]`,
      );
      if (button) button.disabled = !console_.canSubmit(trialId);
      return;
    }
    const name = target.getAttribute('name') as keyof CreateFormState | null;
    if (name && FORM_FIELDS.includes(name)) {
      (console_.form[name] as string) = target.value;
    }
  });

  root.addEventListener('click', (event) => {
    const target = event.target as HTMLElement;
    const trialId = target.getAttribute('data-submit-for');
    if (trialId) {
      void console_.submitResult(trialId);
      return;
    }
    if (target.getAttribute('data-action') === 'retry') {
      void console_.retry();
    }
    if (target.getAttribute('data-action') === 'finalize') {
      void console_.finalizeCampaign();
    }
  });

  root.addEventListener('submit', (event) => {
    const target = event.target as HTMLElement;
    if (target.getAttribute('data-form') === 'create') {
      event.preventDefault();
      void console_.createCampaign();
    }
  });

  const existing = params.get('campaign');
  if (existing) {
    void console_.attach(existing);
  } else {
    console_.render();
  }
  console_.startPolling();
}

document.addEventListener('DOMContentLoaded', boot, false);
