/**
 * Browser entry point: wires the socket, input, and painter together.
 *
 * URL parameters: ?host=…&port=…&task=…&cam=front|side|top|iso
 */

import { CAMERAS } from './camera.js';
import { InputController } from './input.js';
import { Wire } from './net.js';
import type { Mode } from './protocol.js';
import { render, viewScale } from './render.js';
import { applyMessage, freshView, prune } from './view.js';

const params = new URLSearchParams(window.location.search);
const host = params.get('host') ?? window.location.hostname ?? 'localhost';
const port = params.get('port') ?? '8765';
const wantTask = params.get('task');

const canvas = document.getElementById('scene') as HTMLCanvasElement;
const ctx = canvas.getContext('2d')!;

function fitCanvas(): void {
  canvas.width = window.innerWidth;
  canvas.height = window.innerHeight;
}
fitCanvas();
window.addEventListener('resize', fitCanvas);

const view = freshView();
const input = new InputController();
let camIdx = Math.max(0, CAMERAS.findIndex((c) => c.name === (params.get('cam') ?? 'front')));
let statusNote = 'connecting…';
let taskRequested = false;

// short blip for haptic feedback; context unlocks on first key/click
let audio: AudioContext | null = null;
function unlockAudio(): void {
  if (audio === null && typeof AudioContext !== 'undefined') audio = new AudioContext();
}
function click(): void {
  if (!audio || audio.state !== 'running') return;
  const osc = audio.createOscillator();
  const gain = audio.createGain();
  osc.frequency.value = 1250;
  gain.gain.setValueAtTime(0.12, audio.currentTime);
  gain.gain.exponentialRampToValueAtTime(1e-4, audio.currentTime + 0.06);
  osc.connect(gain).connect(audio.destination);
  osc.start();
  osc.stop(audio.currentTime + 0.07);
}

const wire = new Wire(
  `ws://${host}:${port}/ws`,
  // the browser socket satisfies the runtime contract; its handler slots are
  // just declared with DOM event types the shim cannot name
  (url) => new WebSocket(url) as unknown as import('./net.js').SocketLike,
  {
    onMessage(msg) {
      applyMessage(view, msg, performance.now());
      if (msg.type === 'state_update') {
        view.connected = true;
        input.seedFrom(msg.world);
        if (!taskRequested && wantTask && wantTask !== msg.task) {
          wire.sendTask(wantTask);
        }
        taskRequested = true;
      } else if (msg.type === 'feedback' && msg.kind === 'haptic_click') {
        click();
      }
    },
    onStatus(connected, note) {
      view.connected = connected;
      statusNote = note;
      if (!connected) taskRequested = false;
    },
    onFatal(reason) {
      view.connected = false;
      statusNote = `${reason} (not retrying)`;
    },
  },
);
wire.start();

// ---- pointer ----------------------------------------------------------
let dragging = false;
let lastX = 0;
let lastY = 0;

canvas.addEventListener('mousedown', (e) => {
  unlockAudio();
  dragging = true;
  lastX = e.clientX;
  lastY = e.clientY;
});
window.addEventListener('mouseup', () => {
  dragging = false;
});
window.addEventListener('mousemove', (e) => {
  if (!dragging) return;
  const mpp = 1 / viewScale(canvas.width, canvas.height);
  input.drag(e.clientX - lastX, e.clientY - lastY, CAMERAS[camIdx]!, mpp);
  lastX = e.clientX;
  lastY = e.clientY;
});
canvas.addEventListener(
  'wheel',
  (e) => {
    e.preventDefault();
    input.lift(-e.deltaY * 5e-4);
  },
  { passive: false },
);

// ---- keys -------------------------------------------------------------
window.addEventListener('keydown', (e) => {
  unlockAudio();
  switch (e.key) {
    case 'Tab':
      e.preventDefault();
      input.toggleHand(view.world);
      break;
    case ' ':
      e.preventDefault();
      input.setGrasp(true);
      break;
    case 'f':
      input.setFingerOpen(true);
      break;
    case 'q':
      input.spin(0.08);
      break;
    case 'e':
      input.spin(-0.08);
      break;
    case 'c':
      camIdx = (camIdx + 1) % CAMERAS.length;
      break;
    case '1':
    case '2':
    case '3':
      wire.sendMode(`m${e.key}` as Mode);
      break;
    case 'r':
      wire.sendReset();
      break;
  }
});
window.addEventListener('keyup', (e) => {
  if (e.key === ' ') input.setGrasp(false);
  if (e.key === 'f') input.setFingerOpen(false);
});

// ---- frame loop -------------------------------------------------------
function frame(): void {
  const now = performance.now();
  if (wire.connected && view.world) wire.sendInput(input.sample());
  prune(view, now);
  render(ctx, CAMERAS[camIdx]!, view, {
    activeHand: input.active,
    camName: CAMERAS[camIdx]!.name,
    now,
    statusNote,
  });
  requestAnimationFrame(frame);
}
requestAnimationFrame(frame);
