import { StudyApi } from "./api";
import { ConsoleController } from "./controller";

// Plain-DOM shell around ConsoleController. All behavior lives in the
// controller; this file only moves strings between it and the page.

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function text(tag: string, content: string, cls?: string): HTMLElement {
  const node = document.createElement(tag);
  node.textContent = content;
  if (cls) node.className = cls;
  return node;
}

const api = new StudyApi({
  baseUrl: "",
  token: new URLSearchParams(location.search).get("token") ?? undefined,
});
const console_ = new ConsoleController(api);

const join = el<HTMLElement>("join");
const caseView = el<HTMLElement>("case");
const surveyView = el<HTMLElement>("survey");
const doneView = el<HTMLElement>("done");

function render(): void {
  join.hidden = console_.phase !== "idle";
  caseView.hidden = console_.phase !== "case";
  surveyView.hidden = console_.phase !== "survey";
  doneView.hidden =
    console_.phase !== "done" && console_.phase !== "session-complete";
  el("error").textContent = console_.lastError;

  if (console_.phase === "case") renderCase();
  if (console_.phase === "survey") renderSurvey();
  if (console_.phase === "session-complete") {
    el("done-text").textContent =
      "All cases are complete. Please click 'End session' to continue to the survey.";
    el<HTMLButtonElement>("end-session").hidden = false;
  }
  if (console_.phase === "done") {
    el("done-text").textContent = console_.aborted
      ? "Session ended."
      : "Thank you, your responses have been recorded.";
    el<HTMLButtonElement>("end-session").hidden = true;
  }
}

function renderCase(): void {
  const view = console_.renderCase();
  el("heading").textContent = view.heading;
  el("elapsed").textContent = view.elapsed;
  el("note").textContent = view.caseText;
  el("instructions").textContent = view.instructions;

  const input = el<HTMLInputElement>("chat-input");
  input.placeholder = view.chatPlaceholder;
  input.disabled = !view.chatEnabled;
  el<HTMLButtonElement>("chat-send").disabled = !view.chatEnabled;

  const log = el("transcript");
  log.replaceChildren(
    ...console_.transcript.map((t) =>
      text("p", `${t.role}: ${t.text}`, t.pending ? "turn pending" : "turn")
    )
  );

  const chips = el("chips");
  chips.replaceChildren(
    ...console_.chips.map((chip, i) => {
      const node = text("span", chip, "chip");
      node.addEventListener("click", () => {
        console_.removeChip(i);
        render();
      });
      return node;
    })
  );
  el<HTMLButtonElement>("final-submit").disabled = !console_.canSubmitFinal;
}

function renderSurvey(): void {
  const survey = console_.survey;
  if (!survey) return;
  el("survey-title").textContent = survey.definition.title;
  const body = el("survey-items");
  body.replaceChildren(
    ...survey.definition.likert_items.map((item) => {
      const row = text("div", "", "likert-row");
      row.appendChild(text("p", item.text));
      for (let v = survey.definition.scale.min; v <= survey.definition.scale.max; v++) {
        const btn = text("button", String(v));
        if (survey.likert[item.key] === v) btn.className = "selected";
        btn.addEventListener("click", () => {
          console_.answerLikert(item.key, v);
          render();
        });
        row.appendChild(btn);
      }
      return row;
    }),
    ...survey.definition.open_questions.map((q) => {
      const row = text("div", "", "open-row");
      row.appendChild(text("p", q.text));
      const area = document.createElement("textarea");
      area.addEventListener("input", () =>
        console_.answerFreeText(q.key, area.value)
      );
      row.appendChild(area);
      return row;
    })
  );
  el<HTMLButtonElement>("survey-submit").disabled = !console_.surveyComplete;
}

async function guard(action: () => Promise<void>): Promise<void> {
  try {
    await action();
    console_.lastError = "";
  } catch {
    // controller keeps lastError; render shows it
  }
  render();
}

el<HTMLButtonElement>("join-start").addEventListener("click", () =>
  guard(() =>
    console_.start(
      el<HTMLInputElement>("join-plan").value,
      el<HTMLInputElement>("join-participant").value,
      el<HTMLSelectElement>("join-expertise").value
    )
  )
);

el<HTMLButtonElement>("chat-send").addEventListener("click", () => {
  const input = el<HTMLInputElement>("chat-input");
  const value = input.value;
  input.value = "";
  void guard(async () => {
    await console_.sendMessage(value);
  });
});

el<HTMLButtonElement>("chip-add").addEventListener("click", () =>
  guard(async () => {
    const input = el<HTMLInputElement>("chip-input");
    console_.addChip(input.value);
    input.value = "";
  })
);

el<HTMLButtonElement>("final-submit").addEventListener("click", () =>
  guard(() => console_.submitFinal())
);
el<HTMLButtonElement>("end-session").addEventListener("click", () =>
  guard(() => console_.endSession())
);
el<HTMLButtonElement>("survey-submit").addEventListener("click", () =>
  guard(() => console_.submitSurvey())
);

setInterval(() => {
  if (console_.phase === "case") {
    console_.tick();
    el("elapsed").textContent = console_.elapsedDisplay;
  }
}, 1000);

render();
