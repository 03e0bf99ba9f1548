"""Published reference criteria sets for the two prompt families.

Used as fixtures, as the planted mock's canned generations, and as a
starting point when no LLM is available for Stage 1.
"""

from .data import PromptFamily

EVIDENCE_SUPPORT = {
    "Factual Accuracy": [
        "To what extent does the evidence directly support the key claims in the answer, with no unsupported assertions?",
        "How well do the retrieved passages contradict or fail to support any statements in the answer?",
        "To what degree does the answer avoid overgeneralizing or making broad inferences beyond what is stated in the evidence?",
        "How precisely does the answer align with the specificity (e.g., timeframes, quantities, conditions) provided in the evidence?",
        "To what extent are all named entities, events, and relationships in the answer accurately reflected in the evidence passages?",
        "How well does the answer refrain from introducing plausible but unverified details not present in the evidence?",
    ],
    "Completeness of Support": [
        "To what extent does the evidence directly support all key claims in the answer, with no unsupported assertions?",
        "How well do the retrieved passages contain specific details or examples that match the level of specificity in the answer?",
        "To what degree does the evidence fully cover the scope of the answer, including all sub-claims or components mentioned?",
        "How consistently do the passages align with the answer without introducing contradictions or conflicting information?",
        "To what extent does the answer avoid overgeneralizing beyond what is reasonably supported by the evidence?",
        "How well do the passages provide sufficient context or explanation to justify causal or inferential claims made in the answer?",
    ],
    "Specificity Alignment": [
        "To what extent does the answer reflect the same level of specificity as the evidence, avoiding unwarranted generalizations or oversimplifications?",
        "How well do the key claims in the answer map directly to specific details or data points in the evidence, rather than relying on vague or peripheral information?",
        "To what degree does the evidence support the precise scope (e.g., time frame, population, location) asserted in the answer without overextension?",
        "How closely does the answer avoid introducing concepts or conclusions that are more specific than what is warranted by the evidence?",
        "To what extent are named entities, quantities, or relationships in the answer explicitly grounded in corresponding specific mentions within the evidence?",
        "How well does the answer maintain alignment with the evidence by neither omitting critical qualifying conditions nor adding unsupported qualifiers?",
    ],
    "Consistency with Evidence": [
        "To what extent does the evidence directly support the key claims in the answer, with no unsupported assertions?",
        "How well do the retrieved passages contradict or conflict with any statements in the answer?",
        "To what degree does the answer avoid overgeneralizing beyond the scope or specificity of the evidence provided?",
        "How closely does the answer align with the factual details and context present in the evidence, avoiding subtle distortions or misrepresentations?",
        "To what extent can each component of a multi-part answer be individually justified by at least one evidence passage?",
        "How well does the answer reflect the certainty level (e.g., tentative, definitive) expressed in the evidence, without introducing unwarranted confidence or ambiguity?",
    ],
    "Source Attribution": [
        "To what extent does the evidence explicitly attribute the claim to a credible source or original provider of information?",
        "How well do the retrieved passages support the specificity of the claim, without introducing unsupported details or omitting critical qualifiers present in the source?",
        "To what degree is the claim directly verifiable from the cited evidence, rather than requiring inference beyond what the source states?",
        "How consistently does the answer reflect the source's intended meaning, avoiding misrepresentation or overgeneralization of the evidence?",
        "To what extent does the evidence rule out contradictions or significant discrepancies with the claim being made?",
        "How clearly is the connection between the evidence and the claim articulated, such that the support is traceable and transparent?",
    ],
}

SUMMARY_FAITHFULNESS = {
    "Factual Accuracy": [
        "Does the summary include any claims that are not explicitly supported by information in the source document?",
        "Does the summary contradict any specific fact, detail, or relationship stated in the source document?",
        "Are events, actions, or attributes in the summary correctly attributed to the individuals, entities, or sources named in the source document?",
        "Does the summary present speculative, uncertain, or conditional information from the source as definitive or certain?",
        "Does the summary accurately reflect the relative importance or prominence of key points as presented in the source document?",
        "Does the summary introduce numerical data, statistics, or quantitative claims that differ from those in the source document?",
    ],
    "Contradiction Detection": [
        "Does the summary attribute a claim, opinion, or action to a source or entity that is not supported or explicitly stated in the source document?",
        "Does the summary present a possibility or uncertainty as a definitive fact, thereby increasing the level of certainty beyond what is expressed in the source document?",
        "Does the summary state that an event occurred, or a condition exists, when the source document explicitly indicates it did not happen or was not the case?",
        "Does the summary include a causal relationship between two events that is not stated, implied, or supported by the source document?",
        "Does the summary report a numerical value, statistic, or quantitative detail that contradicts the figures provided in the source document?",
        "Does the summary describe an action or outcome as having happened in the past when the source document states it is planned, proposed, or speculative?",
    ],
    "Claim Support": [
        "Does the summary include any claims that are not explicitly supported by evidence or statements in the source document?",
        "Are there any statements in the summary that directly contradict information provided in the source document?",
        "Does the summary attribute actions, opinions, or statements to individuals or entities that are not assigned to them in the source document?",
        "To what extent does the summary present speculative or conditional information from the source as definitive or certain?",
        "Does the summary introduce new causal relationships or implications between events that are not stated or logically supported in the source document?",
        "Are key details in the summary distorted in a way that alters the meaning or significance of the information presented in the source document?",
    ],
    "Misrepresentation Identification": [
        "Does the summary attribute a claim, opinion, or action to a source or entity that is not supported or explicitly stated in the source document?",
        "Does the summary present a speculative or conditional statement from the source as a definitive fact?",
        "Does the summary include a key event, outcome, or statistic that is not mentioned or implied in the source document?",
        "Does the summary reverse, invert, or otherwise distort the causal or temporal relationship between two events described in the source document?",
        "Does the summary exaggerate the strength, scope, or certainty of a finding, trend, or conclusion beyond what is stated in the source document?",
        "Does the summary omit a critical qualifying condition, limitation, or exception present in the source that changes the interpretation of the information?",
    ],
    "Certainty Calibration": [
        "Does the summary present a claim as certain or definitive when the source document expresses it as uncertain, tentative, or conditional?",
        "Does the summary introduce a level of confidence or precision (e.g., “proves,” “definitely,” “exactly”) in a claim that is not supported by the degree of certainty used in the source document?",
        "Are probabilities, frequencies, or likelihoods in the summary accurately reflected in terms of their magnitude and wording compared to the source document (e.g., “likely” vs. “possible” vs. “certain”)?",
        "Does the summary omit hedging language (e.g., “may,” “suggests,” “appears to”) present in the source, thereby overstating the strength of a conclusion?",
        "To what extent does the summary mirror the source document's attribution of claims to specific agents, studies, or evidence, without shifting responsibility or generalizing to broader consensus?",
        "Does the summary elevate a hypothesis, preliminary finding, or speculative idea from the source to the status of an established fact?",
    ],
}

REFERENCE = {
    PromptFamily.EVIDENCE_SUPPORT: EVIDENCE_SUPPORT,
    PromptFamily.SUMMARY_FAITHFULNESS: SUMMARY_FAITHFULNESS,
}
