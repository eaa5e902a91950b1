import { defaultForm, type RunFormState } from "../src/form.js";

export function validKanonForm(): RunFormState {
  const form = defaultForm();
  form.columns = [
    { name: "name", role: "direct", kind: "categorical", userId: false },
    { name: "age", role: "quasi", kind: "numeric", userId: false },
    { name: "city", role: "quasi", kind: "categorical", userId: false },
  ];
  form.suppress = ["name"];
  form.hierarchies = {
    age: "23,20-29,*\n35,30-39,*\n",
    city: "pune,*\ndelhi,*\n",
  };
  form.kanonEnabled = true;
  form.dpEnabled = false;
  form.k = 2;
  form.providerPublicKeyB64 = "cHVibGljLWtleQ==";
  form.inputB64 = "ZW52ZWxvcGU=";
  return form;
}

export function validDpForm(): RunFormState {
  const form = validKanonForm();
  form.kanonEnabled = false;
  form.dpEnabled = true;
  form.query.kind = "sum";
  form.query.epsilon = 0.5;
  form.query.valueColumn = "age";
  form.query.clampLo = 0;
  form.query.clampHi = 100;
  return form;
}

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}
