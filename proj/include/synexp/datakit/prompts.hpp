#pragma once

#include <map>
#include <string>
#include <string_view>

namespace synexp::prompts {

/// Substitute every "{key}" occurrence in a template. Unknown placeholders
/// are left untouched so callers can spot rendering mistakes in goldens.
inline std::string render_template(std::string_view tmpl,
                                   const std::map<std::string, std::string>& values) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t i = 0;
    while (i < tmpl.size()) {
        const auto open = tmpl.find('{', i);
        if (open == std::string_view::npos) {
            out.append(tmpl.substr(i));
            break;
        }
        out.append(tmpl.substr(i, open - i));
        const auto close = tmpl.find('}', open);
        if (close == std::string_view::npos) {
            out.append(tmpl.substr(open));
            break;
        }
        const std::string key(tmpl.substr(open + 1, close - open - 1));
        const auto it = values.find(key);
        if (it != values.end()) {
            out.append(it->second);
        } else {
            out.append(tmpl.substr(open, close - open + 1));
        }
        i = close + 1;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reasoning-trace annotation (web shopping trajectories)
// ---------------------------------------------------------------------------

inline constexpr const char* kReasoningAnnotationSystem =
    "You are an expert in web navigation and e-commerce environments, specializing in providing "
    "actionable guidance for state transitions of an experience model that simulates the "
    "environment dynamics.";

inline constexpr const char* kReasoningAnnotationUser =
    R"(You are synthesizing environment state transition plans for training world models in webshopping tasks.
You are provided with a task instruction, a flag indicating whether the trajectory is successful, and a trajectory of the environment state and the corresponding agent action at each step.

Task Context:
Task: {instruction}
Success: {flag}

Trajectory Steps:
{trajectory_steps}

Your Task:
- Task Tutorial: A high-level guidance of how the environment should transit step-by-step to interact with the agent under the given task instruction. It should highlight the critical steps that the agent should perform in order for the environment to transit to the final successful state.
- State Transition Plans: For each step, first analyze whether the agent's action is likely to success or fail based on the task tutorial (e.g. the search query is too vague or too specific, or the agent clicks the wrong product), and then provide a concise reasoning trace describing how the environment should transition given the current state and action.

CRITICAL: You MUST generate exactly one transition plan for each environment step provided and your state_transitions array must contain exactly len(env_step_ids) entries, one for each step_id.
For product listing pages, the state transition plan should mention some actionable details such as the number of products shown on this page, whether this page should contain the target product given the agent's action.
Focus on actionable guidance for training the experience model. Keep responses concise and practical.

Response Format:
json
{
"task_tutorial":
 {"Overall Plan": "A one-sentence high-level guidance of how the environment should transit step-by-step to interact with the agent under the given task instruction.",
   "Success Mode": "Describe the critical steps that the agent should perform to succeed in the task, where the environment should correspondingly transit to the successful state. Summarize in one sentence.",
   "Failure Mode": "Describe the typical failure mode the agent should avoid, where the environment should correspondingly transit to the failed state once the agent performs the action. Summarize in one sentence."
},
"state_transitions": [{
 "step_id": 0,
 "transition_plan": "Analyze whether the agent's action is good or bad based on the next state and overall task tutorial, and a corresponding plan for how environment should respond to this action."}
...
]
})";

// ---------------------------------------------------------------------------
// Task-variation selection (web shopping)
// ---------------------------------------------------------------------------

inline constexpr const char* kVariationSelectionWebshopSystem =
    "You are an expert in e-commerce task design and AI training data curation.";

inline constexpr const char* kVariationSelectionWebshopUser =
    R"(You are an expert in e-commerce task design. I will give you an original web shopping task instruction and several candidate variations of this task. Your job is to select the most challenging yet feasible variation that would be good to train an AI agent to acquire the skills of shopping for the given product.

Original Task: {task_instruction}
Product Information:
  1. Category: {product_category}
  2. Product Name: {product_name}
  3. Available Attributes: {product_attributes}
Candidate Variations: {candidate_variations}
Criteria for selection:
  - Challenging but Feasible: The task should be more specific or complex than the original, but still achievable, so as to strengthen the agent's capabilities for shopping for the given product.
  - High Quality: The instruction should be clear, grammatically correct, and realistic.
  - Meaningful Variation: The changes should make the task meaningfully different (not just trivial changes).
  - Realistic: The combination of attributes, options, and price should make sense for the product category.

Please respond with:
  1. The number of your selected variation 1-{n_candidates}.
  2. A brief explanation (1-2 sentences) of why this variation is the most challenging and high-quality.

Format your response as:
SELECTION: [number]
REASONING: [explanation])";

// ---------------------------------------------------------------------------
// Task-variation selection (embodied household tasks)
// ---------------------------------------------------------------------------

inline constexpr const char* kVariationSelectionEmbodiedSystem =
    "You are an expert in embodied task design and AI training data curation for interactive "
    "embodied environments.";

inline constexpr const char* kVariationSelectionEmbodiedUser =
    R"(You are an expert in embodied task design. I will give you a feasible task instruction for an embodied agent and several candidate variations of this task. Your job is to select the most challenging yet feasible variation that would be good to train an AI agent to acquire generalizable embodied reasoning skills.

Original Task: {task_instruction}
Environment Context:
  1. Room Type: {room}
  2. Objects Present: {objects}
  3. Containers/Surfaces: {locations}
Candidate Variations: {candidate_variations}
Criteria for selection:
  - Challenging but Feasible: The variation should add complexity (e.g., more objects, constraints, or multi-step actions) without being impossible.
  - High Quality: Clear, grammatical, and realistic in the embodied context.
  - Meaningful Variation: Should involve non-trivial differences in action type, target object, or target location.
  - Realistic: The variation must be consistent with the embodied environment dynamics (e.g., no placing a fridge on a lamp).

Please respond with:
  1. The number of your selected variation 1-{n_candidates}.
  2. A brief explanation (1-2 sentences) of why this variation is the most challenging and high-quality.

Format your response as:
SELECTION: [number]
REASONING: [explanation])";

// ---------------------------------------------------------------------------
// Task-variation generation (web tasks)
// ---------------------------------------------------------------------------

inline constexpr const char* kVariationGenerationWebSystem =
    "You are an expert in designing realistic, diverse, and challenging web interaction tasks "
    "for AI agents.";

inline constexpr const char* kVariationGenerationWebUser =
    R"(I will provide you with several seed web task instructions. Your job is to generate new task variations from each seed.
The variations should keep the same general action type (e.g., search, filter, upvote, navigate, purchase, delete) but differ in target, constraints, or context, making them realistic, challenging, and meaningfully different.

Seed Instructions:
{seed_instructions}

Requirements for variations:
  - Action Consistency: Preserve the same type of action as the seed task.
  - Meaningful Differences: Change the entities, filters, domains, time ranges, or constraints so the new task is distinct but natural.
  - Challenging but Feasible: The variation should slightly increase reasoning or constraint complexity, but remain solvable.
  - High Quality: Grammatically correct, clear, and realistic web tasks.

Please respond with:
For each seed instruction, generate {k} new task variations.
Format your response as:
SEED: [original instruction]
VARIATIONS:
  1. [variation 1]
  2. [variation 2]
  ...

Example:
SEED: List products from living room furniture category by descending price.
VARIATIONS:
  1. List products from bedroom furniture category by ascending price.
  2. Show me the most expensive three dining tables available online.
  3. Find discounted sofas under $500 in the living room furniture category.)";

// ---------------------------------------------------------------------------
// Task-variation selection (web tasks)
// ---------------------------------------------------------------------------

inline constexpr const char* kVariationSelectionWebSystem =
    "You are an expert in interactive web task design and AI training data curation.";

inline constexpr const char* kVariationSelectionWebUser =
    R"(You are an expert in web environment task design. I will give you an original web task instruction and several candidate variations of this task. Your job is to select the most challenging yet feasible variation that would be good to train an AI agent to acquire generalizable skills in web interaction.

Original Task: {task_instruction}
Candidate Variations: {candidate_variations}
Criteria for selection:
  - Challenging but Feasible: The variation should require slightly more reasoning, precision, or constraints than the original, but still be solvable by a web agent.
  - High Quality: Clear, grammatical, and realistic within the web environment.
  - Meaningful Variation: Keep the same action type (e.g., search, navigate, sort, submit, upvote, purchase) as the original, but change the context, target, or condition.
  - Realistic: The task should reflect plausible web interactions a user might request.

Please respond with:
  1. The number of your selected variation 1-{n_candidates}.
  2. A brief explanation (1-2 sentences) of why this variation is the most challenging and high-quality.

Format your response as:
SELECTION: [number]
REASONING: [explanation])";

// ---------------------------------------------------------------------------
// Transition-quality judge
// ---------------------------------------------------------------------------

inline constexpr const char* kTransitionJudgeUser =
    R"(You are an expert judge for scoring the quality of a predicted state transition in a web shopping environment simulator.
You are given:
- Current state (before the action)
- The agent action
- Predicted next state (after the action)

Your task:
1) Evaluate the predicted next state on four rubrics, each scored 0, 1, or 2.
2) Provide brief step-by-step reasoning for each rubric.
3) Output a valid JSON object with the rubric scores and the total (sum of the four rubrics). Do not include extra fields.

General rules:
- Base your judgment only on the provided inputs; do not assume hidden context.
- Use integers only (0/1/2) for rubric scores.
- If an action is invalid or should not change the page, correct behavior may include a no-op with an explicit failure/empty-result signal.
- Be concise but specific in your reasoning (1-3 sentences per rubric).
---

### Rubrics (0/1/2) with anchors:
1) Causal State Consistency | Question: Is the predicted next state both logically consistent with the prior state and causally grounded in the agent's action semantics (e.g., click -> detail page, pagination -> new results, search -> updated listings, back -> prior view)?
  - 2: Coherent and action-appropriate; all expected updates appear with no contradictions.
  - 1: Mostly consistent, but has minor logical or semantic gaps.
  - 0: Inconsistent or not causally linked to the action.

2) Diversity & State Variation | Question: Is there a meaningful, non-degenerate change from the prior state (when change is expected)?
  - 2: Substantive, coherent differences (new results, updated filters, changed details).
  - 1: Minimal or superficial change.
  - 0: No meaningful change, or incoherent jump.

3) Informativeness | Question: Is the predicted state rich, relevant, and internally coherent (e.g., listings with meaningful attributes; filters aligned with content)?
  - 2: Detailed, relevant, and coherent information.
  - 1: Some useful details, but sparse or partially incoherent.
  - 0: Uninformative, irrelevant, or incoherent.

4) Hallucination & Failure Feedback | Question: When the action is invalid or yields no results, does the state reflect an appropriate failure/empty-result signal instead of hallucinating success?
  - 2: Correctly signals failure or success as appropriate, no hallucination.
  - 1: Partial/ambiguous handling of failure.
  - 0: Hallucinates success or ignores failure.

---

### Step-by-step Evaluation (use this structure):
1. Causal State Consistency: <your reasoning> Score: 0/1/2
2. Diversity & State Variation: <your reasoning> Score: 0/1/2
3. Informativeness: <your reasoning> Score: 0/1/2
4. Hallucination & Failure Feedback: <your reasoning> Score: 0/1/2

---

### Final JSON Output:
Output a single valid JSON object. Replace angle brackets with integers only.
{"rubric_scores": {
  "causal_consistency": <0|1|2>,
  "diversity": <0|1|2>,
  "informativeness": <0|1|2>,
  "hallucination": <0|1|2>
}}

Current state: {current_state}
Agent action: {agent_action}
Predicted next state: {predicted_next_state})";

// ---------------------------------------------------------------------------
// Experience-model inference (remote backend system prompt)
// ---------------------------------------------------------------------------

inline constexpr const char* kExperienceStepSystem =
    R"(You are an experience model that simulates an interactive text environment for agent training. Given a task instruction, the interaction history, similar past transitions, the current state and the agent's action, reason step by step about how the environment should respond, then produce the next state and reward.
If the action is invalid, transition to a failure state and assign a zero reward. Assign reward 1 only at the final step when the task is successfully completed; otherwise the reward is 0.
Reply with a fenced JSON object with exactly these keys:
```json
{"reasoning": "<why the environment transitions this way>", "next_state": "<the next environment state>", "reward": 0, "done": false}
```)";

inline constexpr const char* kExperienceStepUser =
    R"(Task: {task}

Interaction history (most recent {history_window} turns):
{history}

Similar past transitions:
{demos}

Current state:
{state}

Agent action:
{action}

Produce the fenced JSON object describing the transition.)";

}  // namespace synexp::prompts
