/** Mirrors of the service API payloads. The UI never derives state from
 * anything but these responses. */

export interface ThreadSummary {
  thread_id: string;
  title: string;
  created_at: number;
  updated_at: number;
  turn_count: number;
}

export interface TurnPair {
  question: string;
  rephrased_question: string;
  answer: string;
  citations: string[];
  tools_used: string[];
  degraded: boolean;
  latency: number;
}

export interface Thread {
  thread_id: string;
  title: string;
  turns: TurnPair[];
  created_at: number;
  updated_at: number;
}

export interface Citation {
  url: string;
  title: string;
}

export interface AssistantResponse {
  answer: string;
  citations: Citation[];
  tools_used: string[];
  retrieval: Record<string, unknown>;
  degraded: boolean;
  latency: number;
}

export interface Health {
  status: "ok" | "building";
  corpus_version: string;
  kb_sizes: Record<string, number>;
}
