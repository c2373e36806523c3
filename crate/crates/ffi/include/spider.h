#ifndef SPIDER_H
#define SPIDER_H

/* Generated by cbindgen from spider-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every FFI entry point.
 */
typedef enum {
  SPIDER_STATUS_OK = 0,
  /**
   * Unexpected internal failure (a bug; see the error message).
   */
  SPIDER_STATUS_INTERNAL = 1,
  /**
   * The input string does not parse under the template grammar.
   */
  SPIDER_STATUS_PARSE = 2,
  /**
   * No registered instruction pattern matches the question.
   */
  SPIDER_STATUS_PLAN = 3,
  /**
   * File system or serialization failure.
   */
  SPIDER_STATUS_IO = 4,
  /**
   * Null pointer, invalid UTF-8, or otherwise unusable argument.
   */
  SPIDER_STATUS_INVALID_ARG = 5,
} SpiderStatus;

/**
 * Opaque pipeline handle: checkpoint + gallery + encoders + planner.
 */
typedef struct SpiderEngine SpiderEngine;

/**
 * The most recent error message raised on this thread, or NULL when no
 * error has occurred. The caller owns the returned string.
 */
char *spider_last_error_message(void);

/**
 * Release a string allocated by this library.
 *
 * # Safety
 * `s` must be NULL or a pointer previously returned by one of this
 * library's functions, not yet freed.
 */
void spider_string_free(char *s);

/**
 * Parse a question string; on success `*out_json` holds the parsed
 * structure as JSON.
 *
 * # Safety
 * `question` must be a valid NUL-terminated string and `out_json` a
 * valid pointer slot.
 */
SpiderStatus spider_parse_question_json(const char *question, char **out_json);

/**
 * Parse an answer string; on success `*out_json` holds the parsed
 * structure as JSON.
 *
 * # Safety
 * `answer` must be a valid NUL-terminated string and `out_json` a
 * valid pointer slot.
 */
SpiderStatus spider_parse_answer_json(const char *answer, char **out_json);

/**
 * Serialize a question JSON document back to its canonical string.
 *
 * # Safety
 * `question_json` must be a valid NUL-terminated string and `out` a
 * valid pointer slot.
 */
SpiderStatus spider_serialize_question(const char *question_json, char **out);

/**
 * Serialize an answer JSON document back to its canonical string.
 *
 * # Safety
 * `answer_json` must be a valid NUL-terminated string and `out` a
 * valid pointer slot.
 */
SpiderStatus spider_serialize_answer(const char *answer_json, char **out);

/**
 * Validate an answer string against a task prompt name (e.g. "IMAGE",
 * "SMARTMULTIMODAL"). `*out_violations_json` receives a JSON array of
 * human-readable violation strings (empty = valid).
 *
 * # Safety
 * Both strings must be valid NUL-terminated strings and
 * `out_violations_json` a valid pointer slot.
 */
SpiderStatus spider_validate_answer(const char *task_name,
                                    const char *answer,
                                    char **out_violations_json);

/**
 * Load an engine from a checkpoint and a gallery JSONL file. On
 * success `*out_engine` owns the handle; release it with
 * [`spider_engine_free`].
 *
 * # Safety
 * Both paths must be valid NUL-terminated strings and `out_engine` a
 * valid pointer slot.
 */
SpiderStatus spider_engine_new(const char *ckpt_path,
                               const char *gallery_path,
                               SpiderEngine **out_engine);

/**
 * Number of gallery assets held by the engine (handy as a load check).
 *
 * # Safety
 * `engine` must be a live handle from [`spider_engine_new`].
 */
int spider_engine_asset_count(const SpiderEngine *engine);

/**
 * Run one question through the pipeline. `*out_result_json` receives
 * the pipeline result (answer, realized assets with cosine scores, and
 * per-group control embeddings) as JSON.
 *
 * # Safety
 * `engine` must be a live handle, `question` a valid NUL-terminated
 * string, and `out_result_json` a valid pointer slot.
 */
SpiderStatus spider_engine_run(const SpiderEngine *engine,
                               const char *question,
                               char **out_result_json);

/**
 * Release an engine handle.
 *
 * # Safety
 * `engine` must be NULL or a handle from [`spider_engine_new`], not
 * yet freed.
 */
void spider_engine_free(SpiderEngine *engine);

#endif /* SPIDER_H */
