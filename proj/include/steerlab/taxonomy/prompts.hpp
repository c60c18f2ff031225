#pragma once

namespace steerlab::taxonomy::prompts {

// Prompt resources for the remote judge. Placeholders in {braces} are
// substituted verbatim before sending.

inline constexpr const char* kClusterDescription = R"(You are analyzing sentences drawn from step-by-step reasoning traces of a language model. The sentences below were grouped together by an unsupervised clustering method.

Top exemplar sentences (strongest members of the cluster):
{top_exemplars}

Random sentences from the same cluster:
{random_exemplars}

Carefully look at the examples and identify:
1. The shared reasoning strategy or cognitive mechanism they express.
2. Common linguistic patterns or structures.
3. Specific phrases or words common to the category.
4. The functional role this kind of sentence plays within the overall reasoning process.

Respond in exactly this format:
Title: <a concise title naming the specific reasoning function>
Description: <a detailed description of what the function does, what is included, and what is excluded from this category>)";

inline constexpr const char* kConsistencyClassify = R"(You are evaluating a taxonomy of reasoning functions. One category is defined as follows.

Category title: {title}
Category description: {description}

Example sentences from this category:
{examples}

Classify the following sentence: does it belong to this category?

Sentence: {sentence}

Answer with a single word, YES or NO.)";

inline constexpr const char* kCompletenessRate = R"(You are evaluating how well a sentence fits the reasoning category it was assigned to.

Category title: {title}
Category description: {description}

Sentence: {sentence}

On a scale from 0-10, where 0 means the sentence does not fit the category at all and 10 means it fits perfectly, rate the quality of this assignment. Answer with a single integer.)";

inline constexpr const char* kIndependenceRate = R"(You are evaluating whether two categories of reasoning functions are distinct.

Category A title: {title_a}
Category A description: {description_a}

Category B title: {title_b}
Category B description: {description_b}

On a scale from 0-10, where 0 means the two categories describe completely different reasoning functions and 10 means they describe essentially the same function, rate how semantically similar the two categories are in terms of their underlying cognitive or functional purpose. Answer with a single integer.)";

}  // namespace steerlab::taxonomy::prompts
