use adcut_core::compression::{pool_features, squeeze_queries, FeatureGrid, QueryBank};
use adcut_core::sampling::{frame_count, plan_request, sample_frames};
use adcut_core::timeline::{align_draft, check_alignment, TtsRealization};
use adcut_core::{
    parse_draft, serialize_draft, validate_draft, ClipMeta, ClipSet, DecorationSetting, Draft, SlowFastConfig,
    TagCategory, TagTaxonomy, VideoNode, VoiceSentence,
};
use proptest::prelude::*;

fn labels(tax: &TagTaxonomy, cat: TagCategory) -> Vec<String> {
    let mut all: Vec<String> = tax.subcategories(cat).flat_map(|(_, l)| l.iter().cloned()).collect();
    all.sort();
    all.dedup();
    all
}

prop_compose! {
    fn tag_subset(cat: TagCategory)(picks in proptest::collection::btree_set(0usize..64, 0..4)) -> Vec<String> {
        let all = labels(&TagTaxonomy::default_taxonomy(), cat);
        picks.into_iter().filter_map(|i| all.get(i).cloned()).collect()
    }
}

prop_compose! {
    /// A draft that passes validation against `long_clips(clips)`.
    fn valid_draft(clips: u32)(
        sentences in proptest::collection::vec(("[A-Za-z ,.!]{1,30}", 1u64..4000, 0u64..800), 1..6),
        spans in proptest::collection::vec(200u64..3000, 1..=clips as usize),
        order in Just((0..clips).collect::<Vec<u32>>()).prop_shuffle(),
        tts in tag_subset(TagCategory::Tts),
        avatar in tag_subset(TagCategory::Avatar),
        music in tag_subset(TagCategory::Music),
    ) -> Draft {
        let mut t = 0;
        let voice_over_track = sentences
            .into_iter()
            .map(|(text, span, gap)| {
                let start = t + gap;
                t = start + span;
                VoiceSentence::new(format!("x{text}"), start, t)
            })
            .collect();
        let mut t = 0;
        let video_nodes_track = spans
            .into_iter()
            .zip(order)
            .map(|(span, index)| {
                let n = VideoNode::new(index, t, t + span, 0);
                t += span;
                n
            })
            .collect();
        Draft {
            voice_over_track,
            video_nodes_track,
            decoration_setting: DecorationSetting { tts_tags: tts, avatar_tags: avatar, music_tags: music },
        }
    }
}

fn long_clips(n: u32) -> ClipSet {
    ClipSet::new((0..n).map(|i| ClipMeta::new(i, 120.0, 3600).unwrap()).collect()).unwrap()
}

proptest! {
    #[test]
    fn serialize_then_parse_is_identity(d in valid_draft(6)) {
        let bytes = serialize_draft(&d);
        let back = parse_draft(&bytes).unwrap();
        prop_assert_eq!(&back, &d);
        prop_assert_eq!(serialize_draft(&back), bytes);
    }

    #[test]
    fn generated_drafts_validate(d in valid_draft(6)) {
        let report = validate_draft(&d, Some(&long_clips(6)), &TagTaxonomy::default_taxonomy());
        prop_assert!(report.is_valid(), "{}", report.to_table());
    }

    #[test]
    fn alignment_invariants(d in valid_draft(6), stretch in proptest::collection::vec(1u64..5000, 6)) {
        let tts = TtsRealization::from_millis(stretch.into_iter().take(d.voice_over_track.len()));
        let plan = align_draft(&d, &tts, &long_clips(6)).unwrap();
        prop_assert!(check_alignment(&plan).is_valid());
        prop_assert_eq!(plan.clip_indices(), d.clip_indices());
        let voiced: u64 = plan.voice_over_track.iter().map(|s| s.span()).sum();
        prop_assert_eq!(voiced, tts.total());
        prop_assert!(plan.voice_over_track.last().unwrap().target_end <= plan.total_duration);
    }

    #[test]
    fn identity_realization_changes_nothing_but_tail(d in valid_draft(6)) {
        let plan = align_draft(&d, &TtsRealization::identity(&d), &long_clips(6)).unwrap();
        prop_assert_eq!(&plan.voice_over_track, &d.voice_over_track);
        let n = d.video_nodes_track.len();
        prop_assert_eq!(&plan.video_nodes_track[..n - 1], &d.video_nodes_track[..n - 1]);
    }

    #[test]
    fn sampled_indices_strictly_increase_within_clip(t in 0.01f64..120.0, fps_l in 1.0f64..60.0, f in 0.05f64..8.0) {
        let l = ((t * fps_l).ceil() as u32).max(1);
        let clip = ClipMeta::new(0, t, l).unwrap();
        let idx = sample_frames(&clip, f);
        prop_assert_eq!(idx.len(), frame_count(&clip, f));
        prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(idx.iter().all(|&i| i < l));
    }

    #[test]
    fn plan_respects_ceiling(durations in proptest::collection::vec(0.1f64..90.0, 1..80)) {
        let clips = ClipSet::new(
            durations.iter().enumerate().map(|(i, &t)| ClipMeta::new(i as u32, t, (t * 30.0).ceil() as u32).unwrap()).collect(),
        ).unwrap();
        let cfg = SlowFastConfig::preset_fast2_slow05();
        let plan = plan_request(&clips, &cfg).unwrap();
        prop_assert!(plan.total_fast_frames <= 600);
        prop_assert!(plan.reduction_factor.is_power_of_two());
        prop_assert_eq!(plan.effective_fast_fps * plan.reduction_factor as f64, 2.0);
        if plan.reduction_factor > 1 {
            // one fewer halving would have exceeded the ceiling
            let coarser = 2.0 / (plan.reduction_factor / 2) as f64;
            let over: usize = clips.iter().map(|c| frame_count(c, coarser)).sum();
            prop_assert!(over > 600);
        }
    }

    #[test]
    fn squeeze_preserves_grand_mean(groups in 1usize..6, alpha in 1usize..5, dim in 1usize..4, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let rows = groups * alpha;
        let data: Vec<f64> = (0..rows * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let bank = QueryBank::new(rows, dim, data.clone()).unwrap();
        let out = squeeze_queries(&bank, alpha).unwrap();
        prop_assert_eq!(out.rows(), groups);
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        prop_assert!((mean(out.data()) - mean(&data)).abs() <= 1e-12 * (1.0 + mean(&data).abs()));
    }
}

#[test]
fn pooling_hand_case() {
    let g = FeatureGrid::new(2, 2, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_eq!(pool_features(&g, 2).unwrap().data(), &[2.5]);
    let q = QueryBank::new(4, 1, vec![1.0, 3.0, 5.0, 7.0]).unwrap();
    assert_eq!(squeeze_queries(&q, 2).unwrap().data(), &[2.0, 6.0]);
}
