"""Prompt templates for every model-facing stage.

Template placeholders are substituted with plain ``str.replace`` so that
literal braces elsewhere in the templates (e.g. the JSON example in the
keyword prompt) survive rendering untouched.
"""
from __future__ import annotations

KEYWORD_SYSTEM = """\
You are an expert medical language model. Given the full radiology report
and the extracted Impression section, extract all specific disease names,
diagnostic labels, and named pathological entities mentioned or implied in
either section. Focus only on established or suspected diagnoses, such as
named conditions.

Only include diagnoses that are positively identified or suspected in the
report. Do not include any conditions that are explicitly ruled out,
negated, or stated as absent.

Do not include general phrases, symptoms, or clinical findings that are not
formal diagnoses.

Output your answer as a valid JSON object with the following format:

{ "keywords": ["diagnosis 1", "diagnosis 2", "diagnosis 3"] }

If no diagnoses are present, return:

{
"keywords": []
}"""

KEYWORD_USER = """\
Final_report: {full_report_text}
Impression: {impression_text}"""

SUMMARY_SYSTEM = """\
You are a concise and accurate radiology assistant, skilled in summarizing
medical texts."""

SUMMARY_USER = """\
Please summarize the following textbook pages focusing on the keyword '{keyword}'.
The summary should highlight key radiologic findings and diagnostic
considerations. Be concise, using 2-3 sentences and your own words.
Output only the summary text itself, with no additional conversational
text or headers.

Textbook Pages Content:
{pages_block_text}"""

MCQ_SYSTEM = """\
You are a specialized AI assistant for creating multiple-choice questions (MCQs)
for radiology education. You must focus *exclusively* on the provided
**Primary Diagnostic Keywords**."""

MCQ_USER = """\
### Primary Diagnostic Keywords to Focus On:
- {keywords_list_str}

### Full Context (for reference)
{mcq_input_context}

### Your Task
Based *only* on the provided context, generate 2 multiple-choice questions
**for each Primary Diagnostic Keyword listed above**. Do not generate questions
for any other terms or topics mentioned in the context. Each question must
test understanding of the information related to the primary keywords.

Follow this format exactly:

### Multiple Choice Questions

#### {{Diagnosis Keyword 1}}

Q1. {{Question stem}}
A. {{Option A}}
B. {{Option B}}
C. {{Option C}}
D. {{Option D}}
Answer: {{Correct Option Letter}}
Explanation: {{Brief explanation based on the provided context.}}"""

EDUCATION_SYSTEM = """\
You are an expert radiology AI assistant. Your task is to synthesize the
provided information into concise, educational feedback focused *only* on the
primary diagnostic keywords provided. Do not explain or elaborate on other
terms from the original report unless they are directly relevant to the
primary keywords."""

EDUCATION_USER = """\
### Primary Diagnostic Keywords
- {keywords_list_str}

### Original Reviewer Report (for context only)
{original_reviewer_report}

### Supporting Educational Material
{user_block_for_final_stages}

### Your Task
Based on all the information above, provide a concise, synthesized feedback.
Structure your response with a section for each **Primary Diagnostic Keyword**.
Focus only on clinical teaching points and imaging pearls related to these
primary keywords."""

JUDGE_SYSTEM = """\
You are an exacting medical education reviewer. Rate the quality of the
artifact shown to you on a 5-point scale (1=Poor, 5=Excellent)."""

JUDGE_USER = """\
Dimension under review: {dimension}

Artifact:
{artifact}

Rate the artifact for this dimension. Respond with a single integer from 1 to 5."""


def render(template: str, **fields: str) -> str:
    """Substitute ``{name}`` placeholders literally, leaving other braces alone."""
    out = template
    for name, value in fields.items():
        out = out.replace("{" + name + "}", value)
    return out


def keyword_list_block(keywords: list[str]) -> str:
    """Value for ``{keywords_list_str}``: the templates supply the leading dash."""
    return "\n- ".join(keywords)
