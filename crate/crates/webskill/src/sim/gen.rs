//! Seeded generation of site families.
//!
//! All sites of a family share one capability manifest, one catalog, and one
//! text pool, so any task expressible through the manifest is solvable on
//! every site. Element ids, labels, page slugs, and flow shapes (autofocus
//! fields, hover-to-open rows, compact checkout, direct issue buttons, decoy
//! pages) vary per site.

use super::search::{capability_defs, derive_capability_plans};
use super::{
    Condition, Effect, ElemPattern, Element, ElemRole, Item, Page, PageRole, RulePattern,
    SimError, SiteSpec, TransitionRule, SITE_SCHEMA,
};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;

pub const SHOPPING: &str = "shopping";
pub const CODING: &str = "coding";

pub const FILTER_KINDS: [&str; 2] = ["deals", "top_rated"];
pub const LABEL_KINDS: [&str; 3] = ["bug", "feature", "docs"];

const ITEM_POOL: [&str; 16] = [
    "ceramic mug",
    "desk lamp",
    "spiral notebook",
    "canvas backpack",
    "wireless headphones",
    "electric kettle",
    "trail sneakers",
    "compact umbrella",
    "phone charger",
    "desk fan",
    "steel water bottle",
    "mechanical keyboard",
    "monitor stand",
    "coffee grinder",
    "wall clock",
    "yoga mat",
];

const REPO_POOL: [&str; 8] = [
    "data-pipeline",
    "web-crawler",
    "auth-service",
    "game-engine",
    "cli-tools",
    "docs-site",
    "ml-sandbox",
    "config-manager",
];

const CONSONANTS: [char; 14] = [
    'b', 'd', 'f', 'g', 'k', 'l', 'm', 'n', 'p', 'r', 's', 't', 'v', 'z',
];
const VOWELS: [char; 5] = ['a', 'e', 'i', 'o', 'u'];

fn slug(rng: &mut ChaCha20Rng, syllables: usize) -> String {
    let mut s = String::new();
    for _ in 0..syllables {
        s.push(CONSONANTS[rng.random_range(0..CONSONANTS.len())]);
        s.push(VOWELS[rng.random_range(0..VOWELS.len())]);
    }
    s
}

/// A fresh id, unique across the whole family. Never contains `_`, so row
/// ids (`{prefix}_{i}`) cannot collide with it.
fn fresh_id(rng: &mut ChaCha20Rng, used: &mut BTreeSet<String>) -> String {
    loop {
        let syllables = 2 + rng.random_range(0..2usize);
        let word = slug(rng, syllables);
        let id = format!("{}{}", word, rng.random_range(0..10u8));
        if used.insert(id.clone()) {
            return id;
        }
    }
}

fn pick<'a>(rng: &mut ChaCha20Rng, options: &[&'a str]) -> &'a str {
    options[rng.random_range(0..options.len())]
}

struct SiteBuilder {
    rng: ChaCha20Rng,
    site: String,
    pages: Vec<Page>,
    rules: Vec<TransitionRule>,
}

impl SiteBuilder {
    fn id(&mut self, used: &mut BTreeSet<String>) -> String {
        fresh_id(&mut self.rng, used)
    }

    fn page_id(&mut self, used: &mut BTreeSet<String>) -> String {
        loop {
            let id = format!("{}/{}", self.site, slug(&mut self.rng, 2));
            if used.insert(id.clone()) {
                return id;
            }
        }
    }

    fn add_page(&mut self, id: &str, role: PageRole) {
        self.pages.push(Page {
            id: id.to_string(),
            role,
            elements: Vec::new(),
        });
    }

    fn add_elem(&mut self, page: &str, id: &str, role: ElemRole, label: &str) {
        let p = self
            .pages
            .iter_mut()
            .find(|p| p.id == page)
            .expect("page exists");
        p.elements.push(Element {
            id: id.to_string(),
            role,
            label: label.to_string(),
        });
    }

    fn rule(
        &mut self,
        page: &str,
        pattern: RulePattern,
        conditions: Vec<Condition>,
        effects: Vec<Effect>,
    ) {
        self.rules.push(TransitionRule {
            page: page.to_string(),
            pattern,
            conditions,
            effects,
        });
    }

    fn click_rule(&mut self, page: &str, elem: &str, conditions: Vec<Condition>, effects: Vec<Effect>) {
        self.rule(
            page,
            RulePattern::Click {
                elem: ElemPattern::Exact { id: elem.into() },
            },
            conditions,
            effects,
        );
    }
}

/// Header shared by a set of pages: home link plus optional cart link.
fn add_header(
    b: &mut SiteBuilder,
    pages: &[String],
    home: &str,
    home_id: &str,
    home_label: &str,
    cart: Option<(&str, &str, &str)>,
) {
    for page in pages {
        b.add_elem(page, home_id, ElemRole::HomeLink, home_label);
        b.click_rule(page, home_id, vec![], vec![Effect::GotoPage { page: home.into() }]);
        if let Some((cart_id, cart_label, cart_page)) = cart {
            b.add_elem(page, cart_id, ElemRole::CartLink, cart_label);
            b.click_rule(
                page,
                cart_id,
                vec![],
                vec![Effect::GotoPage {
                    page: cart_page.into(),
                }],
            );
        }
    }
}

fn add_decor(b: &mut SiteBuilder, used: &mut BTreeSet<String>, page: &str, count: usize) {
    const DECOR_LABELS: [&str; 6] = [
        "Free shipping on orders over $30",
        "New arrivals every week",
        "Customer favorites",
        "About us",
        "Help center",
        "Terms of service",
    ];
    for _ in 0..count {
        let id = b.id(used);
        let label = pick(&mut b.rng, &DECOR_LABELS).to_string();
        b.add_elem(page, &id, ElemRole::Decor, &label);
        b.click_rule(page, &id, vec![], vec![Effect::NoEffect]);
    }
}

/// Display-only nodes still get a no-effect click rule so the rule table is
/// total over declared elements.
fn add_display(b: &mut SiteBuilder, page: &str, id: &str, role: ElemRole, label: &str) {
    b.add_elem(page, id, role, label);
    b.click_rule(page, id, vec![], vec![Effect::NoEffect]);
}

fn add_info_pages(
    b: &mut SiteBuilder,
    used: &mut BTreeSet<String>,
    home: &str,
    home_id: &str,
    home_label: &str,
    count: usize,
) -> Vec<String> {
    const INFO_LABELS: [&str; 4] = ["Deals", "Blog", "Contact", "FAQ"];
    let mut pages = Vec::new();
    for i in 0..count {
        let page = b.page_id(used);
        b.add_page(&page, PageRole::Info);
        b.add_elem(&page, home_id, ElemRole::HomeLink, home_label);
        b.click_rule(&page, home_id, vec![], vec![Effect::GotoPage { page: home.into() }]);
        add_decor(b, used, &page, 1);
        let link_id = b.id(used);
        b.add_elem(
            home,
            &link_id,
            ElemRole::InfoLink { page: page.clone() },
            INFO_LABELS[i % INFO_LABELS.len()],
        );
        b.click_rule(home, &link_id, vec![], vec![Effect::GotoPage { page: page.clone() }]);
        pages.push(page);
    }
    pages
}

fn build_shopping_site(
    site: String,
    seed: u64,
    rng: ChaCha20Rng,
    used: &mut BTreeSet<String>,
    catalog: Vec<Item>,
) -> SiteSpec {
    let mut b = SiteBuilder {
        rng,
        site: site.clone(),
        pages: Vec::new(),
        rules: Vec::new(),
    };

    // Flow shape flags.
    let autofocus = b.rng.random_bool(0.5);
    let hover_rows = b.rng.random_bool(0.5);
    let compact_checkout = b.rng.random_bool(0.5);
    let info_count = b.rng.random_range(0..3usize);
    let decor_count = 1 + b.rng.random_range(0..3usize);

    let home = b.page_id(used);
    let results = b.page_id(used);
    let preview = b.page_id(used);
    let item = b.page_id(used);
    let cart = b.page_id(used);
    let checkout = b.page_id(used);
    let confirm = b.page_id(used);

    b.add_page(&home, PageRole::Home);
    b.add_page(&results, PageRole::Results);
    if !hover_rows {
        b.add_page(&preview, PageRole::Preview);
    }
    b.add_page(&item, PageRole::Item);
    b.add_page(&cart, PageRole::Cart);
    if !compact_checkout {
        b.add_page(&checkout, PageRole::Checkout);
    }
    b.add_page(&confirm, PageRole::OrderConfirm);

    let home_id = b.id(used);
    let home_label = pick(&mut b.rng, &["Home", "Start", "Main page"]).to_string();
    let cart_id = b.id(used);
    let cart_label = pick(&mut b.rng, &["Cart", "Basket", "Your bag"]).to_string();
    let mut header_pages = vec![home.clone(), results.clone(), item.clone(), cart.clone(), confirm.clone()];
    if !hover_rows {
        header_pages.push(preview.clone());
    }
    if !compact_checkout {
        header_pages.push(checkout.clone());
    }
    add_header(
        &mut b,
        &header_pages,
        &home,
        &home_id,
        &home_label,
        Some((&cart_id, &cart_label, &cart)),
    );

    // Search box on home and results.
    let box_id = b.id(used);
    let box_label = pick(
        &mut b.rng,
        &["Search", "Find products", "What are you looking for?"],
    )
    .to_string();
    for page in [&home, &results] {
        b.add_elem(page, &box_id, ElemRole::SearchBox, &box_label);
        b.click_rule(page, &box_id, vec![], vec![Effect::Focus { elem: box_id.clone() }]);
        let conditions = if autofocus {
            vec![]
        } else {
            vec![Condition::FocusedIs { elem: box_id.clone() }]
        };
        b.rule(
            page,
            RulePattern::Type {
                elem: ElemPattern::Exact { id: box_id.clone() },
            },
            conditions,
            vec![Effect::SetFieldFromTyped { field: box_id.clone() }],
        );
        b.rule(
            page,
            RulePattern::Press { keys: "Enter".into() },
            vec![Condition::FieldNonEmpty { field: box_id.clone() }],
            vec![
                Effect::RunSearch { field: box_id.clone() },
                Effect::GotoPage { page: results.clone() },
            ],
        );
    }

    // Result rows.
    let row_prefix = b.id(used);
    for index in 0..catalog.len() {
        b.add_elem(
            &results,
            &format!("{row_prefix}_{index}"),
            ElemRole::RowLink { index },
            "Result",
        );
    }
    if hover_rows {
        b.rule(
            &results,
            RulePattern::Click {
                elem: ElemPattern::RowIndexed { prefix: row_prefix.clone() },
            },
            vec![Condition::HoveredSelf],
            vec![
                Effect::OpenResultRow,
                Effect::MarkViewed,
                Effect::GotoPage { page: item.clone() },
            ],
        );
    } else {
        b.rule(
            &results,
            RulePattern::Click {
                elem: ElemPattern::RowIndexed { prefix: row_prefix.clone() },
            },
            vec![],
            vec![Effect::OpenResultRow, Effect::GotoPage { page: preview.clone() }],
        );
        let details_id = b.id(used);
        let details_label = pick(&mut b.rng, &["View details", "Open item", "See more"]).to_string();
        b.add_elem(&preview, &details_id, ElemRole::ViewDetails, &details_label);
        b.click_rule(
            &preview,
            &details_id,
            vec![],
            vec![Effect::MarkViewed, Effect::GotoPage { page: item.clone() }],
        );
        let title = b.id(used);
        add_display(&mut b, &preview, &title, ElemRole::ItemTitle, "Quick view");
    }

    // Filter menu on results.
    let menu_id = b.id(used);
    let menu_label = pick(&mut b.rng, &["Filter", "Refine", "Sort & filter"]).to_string();
    b.add_elem(&results, &menu_id, ElemRole::FilterMenu, &menu_label);
    b.click_rule(&results, &menu_id, vec![], vec![Effect::OpenMenu]);
    for kind in FILTER_KINDS {
        let opt_id = b.id(used);
        b.add_elem(
            &results,
            &opt_id,
            ElemRole::FilterOption { kind: kind.into() },
            &format!("Only {}", kind.replace('_', " ")),
        );
        b.click_rule(
            &results,
            &opt_id,
            vec![Condition::MenuOpen],
            vec![Effect::ApplyFilter { kind: kind.into() }, Effect::CloseMenu],
        );
    }
    let badge = b.id(used);
    add_display(&mut b, &results, &badge, ElemRole::FilterBadge, "Active filter");

    // Item page: add-to-cart and wishlist, both behind a confirm dialog.
    let title = b.id(used);
    add_display(&mut b, &item, &title, ElemRole::ItemTitle, "Item");
    let add_id = b.id(used);
    let add_label = pick(&mut b.rng, &["Add to cart", "Add to bag", "Buy"]).to_string();
    b.add_elem(&item, &add_id, ElemRole::AddToCart, &add_label);
    b.click_rule(&item, &add_id, vec![], vec![Effect::OpenDialog { dialog: "add".into() }]);
    let confirm_add = b.id(used);
    b.add_elem(&item, &confirm_add, ElemRole::ConfirmAdd, "Confirm");
    b.click_rule(
        &item,
        &confirm_add,
        vec![Condition::DialogIs { dialog: "add".into() }],
        vec![Effect::AddCurrentToCart, Effect::CloseDialog],
    );
    let wish_id = b.id(used);
    let wish_label = pick(&mut b.rng, &["Save for later", "Add to wishlist", "Keep"]).to_string();
    b.add_elem(&item, &wish_id, ElemRole::WishButton, &wish_label);
    b.click_rule(&item, &wish_id, vec![], vec![Effect::OpenDialog { dialog: "wish".into() }]);
    let confirm_wish = b.id(used);
    b.add_elem(&item, &confirm_wish, ElemRole::ConfirmWish, "Confirm");
    b.click_rule(
        &item,
        &confirm_wish,
        vec![Condition::DialogIs { dialog: "wish".into() }],
        vec![Effect::AddCurrentToWishlist, Effect::CloseDialog],
    );

    // Cart and checkout.
    let note = b.id(used);
    add_display(&mut b, &cart, &note, ElemRole::CartNote, "Cart contents");
    let place_label = pick(&mut b.rng, &["Place order", "Pay now", "Complete purchase"]).to_string();
    if compact_checkout {
        let place_id = b.id(used);
        b.add_elem(&cart, &place_id, ElemRole::PlaceOrder, &place_label);
        b.click_rule(
            &cart,
            &place_id,
            vec![Condition::CartNonEmpty],
            vec![Effect::PlaceOrder, Effect::GotoPage { page: confirm.clone() }],
        );
    } else {
        let co_id = b.id(used);
        let co_label = pick(&mut b.rng, &["Checkout", "Proceed to checkout", "Continue"]).to_string();
        b.add_elem(&cart, &co_id, ElemRole::CheckoutButton, &co_label);
        b.click_rule(
            &cart,
            &co_id,
            vec![Condition::CartNonEmpty],
            vec![Effect::GotoPage { page: checkout.clone() }],
        );
        let place_id = b.id(used);
        b.add_elem(&checkout, &place_id, ElemRole::PlaceOrder, &place_label);
        b.click_rule(
            &checkout,
            &place_id,
            vec![Condition::CartNonEmpty],
            vec![Effect::PlaceOrder, Effect::GotoPage { page: confirm.clone() }],
        );
    }
    let order_note = b.id(used);
    add_display(&mut b, &confirm, &order_note, ElemRole::OrderNote, "Order placed");

    add_decor(&mut b, used, &home, decor_count);
    add_info_pages(&mut b, used, &home, &home_id, &home_label, info_count);

    SiteSpec {
        schema: SITE_SCHEMA.into(),
        id: site,
        category: SHOPPING.into(),
        seed,
        pages: b.pages,
        rules: b.rules,
        capabilities: capability_defs(SHOPPING)
            .iter()
            .map(|c| c.name.to_string())
            .collect(),
        catalog,
        text_pool: Vec::new(),
    }
}

fn build_coding_site(
    site: String,
    seed: u64,
    rng: ChaCha20Rng,
    used: &mut BTreeSet<String>,
    text_pool: Vec<String>,
) -> SiteSpec {
    let mut b = SiteBuilder {
        rng,
        site: site.clone(),
        pages: Vec::new(),
        rules: Vec::new(),
    };

    let autofocus = b.rng.random_bool(0.5);
    let direct_issue_button = b.rng.random_bool(0.5);
    let info_count = b.rng.random_range(0..2usize);
    let decor_count = 1 + b.rng.random_range(0..2usize);

    let home = b.page_id(used);
    let new_repo = b.page_id(used);
    let repo = b.page_id(used);
    let issues = b.page_id(used);
    let new_issue = b.page_id(used);
    let issue = b.page_id(used);

    b.add_page(&home, PageRole::Home);
    b.add_page(&new_repo, PageRole::NewRepoForm);
    b.add_page(&repo, PageRole::Repo);
    if !direct_issue_button {
        b.add_page(&issues, PageRole::Issues);
    }
    b.add_page(&new_issue, PageRole::NewIssueForm);
    b.add_page(&issue, PageRole::Issue);

    let home_id = b.id(used);
    let home_label = pick(&mut b.rng, &["Dashboard", "Home", "Overview"]).to_string();
    let mut header_pages = vec![
        home.clone(),
        new_repo.clone(),
        repo.clone(),
        new_issue.clone(),
        issue.clone(),
    ];
    if !direct_issue_button {
        header_pages.push(issues.clone());
    }
    add_header(&mut b, &header_pages, &home, &home_id, &home_label, None);

    // Repo creation.
    let new_btn = b.id(used);
    let new_label = pick(&mut b.rng, &["New repository", "Create repo", "New project"]).to_string();
    b.add_elem(&home, &new_btn, ElemRole::NewRepoButton, &new_label);
    b.click_rule(&home, &new_btn, vec![], vec![Effect::GotoPage { page: new_repo.clone() }]);
    let name_field = b.id(used);
    b.add_elem(&new_repo, &name_field, ElemRole::NameField, "Repository name");
    b.click_rule(&new_repo, &name_field, vec![], vec![Effect::Focus { elem: name_field.clone() }]);
    b.rule(
        &new_repo,
        RulePattern::Type {
            elem: ElemPattern::Exact { id: name_field.clone() },
        },
        if autofocus {
            vec![]
        } else {
            vec![Condition::FocusedIs { elem: name_field.clone() }]
        },
        vec![Effect::SetFieldFromTyped { field: name_field.clone() }],
    );
    let create_btn = b.id(used);
    let create_label = pick(&mut b.rng, &["Create", "Create repository", "Save"]).to_string();
    b.add_elem(&new_repo, &create_btn, ElemRole::CreateRepoButton, &create_label);
    b.click_rule(
        &new_repo,
        &create_btn,
        vec![Condition::FieldNonEmpty { field: name_field.clone() }],
        vec![
            Effect::CreateRepoFromField { field: name_field.clone() },
            Effect::GotoPage { page: repo.clone() },
        ],
    );

    // Repo rows on the dashboard.
    let row_prefix = b.id(used);
    for index in 0..5 {
        b.add_elem(
            &home,
            &format!("{row_prefix}_{index}"),
            ElemRole::RepoRowLink { index },
            "Repository",
        );
    }
    b.rule(
        &home,
        RulePattern::Click {
            elem: ElemPattern::RowIndexed { prefix: row_prefix.clone() },
        },
        vec![],
        vec![Effect::OpenRepoRow, Effect::GotoPage { page: repo.clone() }],
    );

    // Repo page.
    let repo_title = b.id(used);
    add_display(&mut b, &repo, &repo_title, ElemRole::RepoTitle, "Repository");
    let star_btn = b.id(used);
    let star_label = pick(&mut b.rng, &["Star", "Add star", "Favorite"]).to_string();
    b.add_elem(&repo, &star_btn, ElemRole::StarButton, &star_label);
    b.click_rule(&repo, &star_btn, vec![], vec![Effect::StarCurrentRepo]);

    let issue_btn_label = pick(&mut b.rng, &["New issue", "Open issue", "Report issue"]).to_string();
    if direct_issue_button {
        let btn = b.id(used);
        b.add_elem(&repo, &btn, ElemRole::NewIssueButton, &issue_btn_label);
        b.click_rule(&repo, &btn, vec![], vec![Effect::GotoPage { page: new_issue.clone() }]);
    } else {
        let tab = b.id(used);
        let tab_label = pick(&mut b.rng, &["Issues", "Issue tracker", "Tickets"]).to_string();
        b.add_elem(&repo, &tab, ElemRole::IssuesTab, &tab_label);
        b.click_rule(&repo, &tab, vec![], vec![Effect::GotoPage { page: issues.clone() }]);
        let btn = b.id(used);
        b.add_elem(&issues, &btn, ElemRole::NewIssueButton, &issue_btn_label);
        b.click_rule(&issues, &btn, vec![], vec![Effect::GotoPage { page: new_issue.clone() }]);
    }

    // Issue creation.
    let title_field = b.id(used);
    b.add_elem(&new_issue, &title_field, ElemRole::TitleField, "Title");
    b.click_rule(
        &new_issue,
        &title_field,
        vec![],
        vec![Effect::Focus { elem: title_field.clone() }],
    );
    b.rule(
        &new_issue,
        RulePattern::Type {
            elem: ElemPattern::Exact { id: title_field.clone() },
        },
        if autofocus {
            vec![]
        } else {
            vec![Condition::FocusedIs { elem: title_field.clone() }]
        },
        vec![Effect::SetFieldFromTyped { field: title_field.clone() }],
    );
    let submit = b.id(used);
    let submit_label = pick(&mut b.rng, &["Submit", "Create issue", "Open"]).to_string();
    b.add_elem(&new_issue, &submit, ElemRole::SubmitIssue, &submit_label);
    b.click_rule(
        &new_issue,
        &submit,
        vec![Condition::FieldNonEmpty { field: title_field.clone() }],
        vec![
            Effect::CreateIssueFromField { field: title_field.clone() },
            Effect::GotoPage { page: issue.clone() },
        ],
    );

    // Issue page: labels.
    let issue_title = b.id(used);
    add_display(&mut b, &issue, &issue_title, ElemRole::IssueTitle, "Issue");
    let label_menu = b.id(used);
    let menu_label = pick(&mut b.rng, &["Labels", "Add label", "Tags"]).to_string();
    b.add_elem(&issue, &label_menu, ElemRole::LabelMenu, &menu_label);
    b.click_rule(&issue, &label_menu, vec![], vec![Effect::OpenMenu]);
    for kind in LABEL_KINDS {
        let opt = b.id(used);
        b.add_elem(&issue, &opt, ElemRole::LabelOption { kind: kind.into() }, kind);
        b.click_rule(
            &issue,
            &opt,
            vec![Condition::MenuOpen],
            vec![Effect::AddLabel { kind: kind.into() }, Effect::CloseMenu],
        );
    }

    add_decor(&mut b, used, &home, decor_count);
    add_info_pages(&mut b, used, &home, &home_id, &home_label, info_count);

    SiteSpec {
        schema: SITE_SCHEMA.into(),
        id: site,
        category: CODING.into(),
        seed,
        pages: b.pages,
        rules: b.rules,
        capabilities: capability_defs(CODING)
            .iter()
            .map(|c| c.name.to_string())
            .collect(),
        catalog: Vec::new(),
        text_pool,
    }
}

fn family_rng(category: &str, seed: u64, lane: &str) -> ChaCha20Rng {
    let mut hasher = Sha256::new();
    hasher.update(category.as_bytes());
    hasher.update(seed.to_le_bytes());
    hasher.update(lane.as_bytes());
    ChaCha20Rng::from_seed(hasher.finalize().into())
}

/// Generate `n_sites` sites of one category. Identical inputs reproduce the
/// specs byte for byte.
pub fn generate_site_family(
    category: &str,
    n_sites: usize,
    seed: u64,
) -> Result<Vec<SiteSpec>, SimError> {
    if n_sites == 0 {
        return Err(SimError::Generation("n_sites must be at least 1".into()));
    }
    if category != SHOPPING && category != CODING {
        return Err(SimError::UnknownCategory {
            label: category.to_string(),
        });
    }

    // Shared inputs: catalog / text pool are family-wide so every task is
    // expressible on every site.
    let mut shared_rng = family_rng(category, seed, "shared");
    let catalog: Vec<Item> = {
        let mut indices: Vec<usize> = (0..ITEM_POOL.len()).collect();
        for i in (1..indices.len()).rev() {
            indices.swap(i, shared_rng.random_range(0..i + 1));
        }
        indices
            .into_iter()
            .take(8)
            .map(|i| {
                let mut tags = Vec::new();
                if i % 2 == 0 {
                    tags.push(FILTER_KINDS[0].to_string());
                }
                if i % 3 == 0 {
                    tags.push(FILTER_KINDS[1].to_string());
                }
                Item {
                    name: ITEM_POOL[i].to_string(),
                    tags,
                }
            })
            .collect()
    };
    let text_pool: Vec<String> = REPO_POOL.iter().map(|s| s.to_string()).collect();

    let mut used = BTreeSet::new();
    let mut sites = Vec::new();
    for i in 0..n_sites {
        let site_id = format!("{category}{i}");
        let rng = family_rng(category, seed, &site_id);
        let spec = match category {
            SHOPPING => build_shopping_site(site_id, seed, rng, &mut used, catalog.clone()),
            _ => build_coding_site(site_id, seed, rng, &mut used, text_pool.clone()),
        };
        check_site(&spec)?;
        sites.push(spec);
    }
    Ok(sites)
}

/// Build-time checks: the rule table is total over declared elements, rules
/// reference declared elements, and every capability is reachable (its plan
/// derives with a span inside the size bounds).
pub fn check_site(spec: &SiteSpec) -> Result<(), SimError> {
    for page in &spec.pages {
        for elem in &page.elements {
            let covered = spec.rules.iter().any(|r| {
                r.page == page.id
                    && match &r.pattern {
                        RulePattern::Click { elem: p } | RulePattern::Type { elem: p } => {
                            p.matches(&elem.id).is_some()
                        }
                        RulePattern::Press { .. } => false,
                    }
            });
            if !covered {
                return Err(SimError::Generation(format!(
                    "element `{}` on `{}` has no transition rule",
                    elem.id, page.id
                )));
            }
        }
    }
    for rule in &spec.rules {
        let Some(page) = spec.page(&rule.page) else {
            return Err(SimError::Generation(format!(
                "rule references unknown page `{}`",
                rule.page
            )));
        };
        let pattern_ok = match &rule.pattern {
            RulePattern::Click { elem } | RulePattern::Type { elem } => match elem {
                ElemPattern::Exact { id } => page.elements.iter().any(|e| e.id == *id),
                ElemPattern::RowIndexed { prefix } => page
                    .elements
                    .iter()
                    .any(|e| e.id.starts_with(&format!("{prefix}_"))),
            },
            RulePattern::Press { .. } => true,
        };
        if !pattern_ok {
            return Err(SimError::Generation(format!(
                "rule on `{}` references an undeclared element",
                rule.page
            )));
        }
    }
    derive_capability_plans(spec)?;
    Ok(())
}
